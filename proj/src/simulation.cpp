#include "mmgpvae/simulation.hpp"

#include "mmgpvae/rng.hpp"
#include "mmgpvae/template_glyph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mmgpvae {

namespace {
constexpr std::uint64_t kLatentPurpose = 0x6A7E;
constexpr std::uint64_t kSpikePurpose = 0x599E;
constexpr std::uint64_t kLoadingPurpose = 0x10AD;
constexpr std::uint64_t kSplitPurpose = 0x5917;

Matrix parse_glyph(std::istream& in, Index side, const std::string& origin) {
  Matrix glyph(side, side);
  std::string line;
  for (Index r = 0; r < side; ++r) {
    if (!std::getline(in, line))
      throw IoError("template glyph '" + origin + "': expected " + std::to_string(side) +
                    " lines");
    std::istringstream row(line);
    for (Index c = 0; c < side; ++c) {
      double v;
      if (!(row >> v))
        throw IoError("template glyph '" + origin + "': row " + std::to_string(r) +
                      " has fewer than " + std::to_string(side) + " values");
      if (v < 0.0 || v > 1.0)
        throw IoError("template glyph '" + origin + "': values must lie in [0, 1]");
      glyph(r, c) = v;
    }
  }
  return glyph;
}
}  // namespace

Matrix load_template_glyph(const std::string& path, Index side) {
  if (path.empty()) {
    if (side == 28) {
      std::istringstream in(detail::kTemplateGlyphText);
      return parse_glyph(in, side, "<bundled>");
    }
    // procedural fallback for other sizes: two soft bumps, rotationally
    // asymmetric, mass kept inside the frame at the largest scale
    Matrix glyph(side, side);
    const double s = static_cast<double>(side);
    const double w = 0.12 * s + 0.3;
    for (Index r = 0; r < side; ++r)
      for (Index c = 0; c < side; ++c) {
        const double dr1 = static_cast<double>(r) - 0.34 * s;
        const double dc1 = static_cast<double>(c) - 0.56 * s;
        const double dr2 = static_cast<double>(r) - 0.62 * s;
        const double dc2 = static_cast<double>(c) - 0.40 * s;
        const double v = std::exp(-(dr1 * dr1 + dc1 * dc1) / (2.0 * w * w)) +
                         0.6 * std::exp(-(dr2 * dr2 + dc2 * dc2) / (2.0 * w * w));
        glyph(r, c) = std::min(v, 1.0);
      }
    return glyph;
  }
  std::ifstream in(path);
  if (!in) throw IoError("template glyph '" + path + "': cannot open");
  return parse_glyph(in, side, path);
}

Matrix render_frame(const Matrix& glyph, double angle_deg, double scale) {
  const Index side = glyph.rows();
  if (glyph.cols() != side) throw ParameterError("render_frame: glyph must be square");
  if (!(scale > 0.0)) throw ParameterError("render_frame: scale must be > 0");
  const double c = (static_cast<double>(side) - 1.0) / 2.0;
  const double th = angle_deg * M_PI / 180.0;
  const double cos_t = std::cos(th), sin_t = std::sin(th);
  Matrix out(side, side);
  for (Index r = 0; r < side; ++r) {
    for (Index col = 0; col < side; ++col) {
      const double u = static_cast<double>(col) - c;  // x, rightward
      const double v = static_cast<double>(r) - c;    // y, downward
      // inverse map: undo rotation, undo magnification
      const double su = (cos_t * u + sin_t * v) / scale;
      const double sv = (-sin_t * u + cos_t * v) / scale;
      const double sc = su + c, sr = sv + c;
      const Index r0 = static_cast<Index>(std::floor(sr));
      const Index c0 = static_cast<Index>(std::floor(sc));
      const double fr = sr - static_cast<double>(r0);
      const double fc = sc - static_cast<double>(c0);
      auto at = [&](Index rr, Index cc) -> double {
        return (rr < 0 || rr >= side || cc < 0 || cc >= side) ? 0.0 : glyph(rr, cc);
      };
      out(r, col) = (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1)) +
                    fr * ((1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1));
    }
  }
  return out;
}

std::vector<Matrix> sample_gp_trajectories(const SimConfig& cfg) {
  cfg.validate();
  Matrix cov = build_rbf_gram(cfg.kernel, cfg.t_bins);
  cov.diagonal().array() += cfg.kernel.alpha;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("sample_gp_trajectories: Cholesky failed; raise alpha");
  const Matrix chol = llt.matrixL();
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(cfg.trials));
  for (Index i = 0; i < cfg.trials; ++i) {
    Rng rng(seed_stream(cfg.seed, kLatentPurpose, static_cast<std::uint64_t>(i)));
    Matrix z(3, cfg.t_bins);
    for (Index p = 0; p < 3; ++p)
      z.row(p) = (chol * rng.normal_vector(cfg.t_bins)).transpose();
    out.push_back(std::move(z));
  }
  return out;
}

Matrix render_frames(const Vector& angles_deg, const Vector& scales, const Matrix& glyph) {
  if (angles_deg.size() != scales.size())
    throw ParameterError("render_frames: angle/scale lengths differ");
  const Index side = glyph.rows();
  const Index t_bins = angles_deg.size();
  Matrix frames(side * side, t_bins);
  for (Index t = 0; t < t_bins; ++t) {
    const Matrix frame = render_frame(glyph, angles_deg[t], scales[t]);
    frames.col(t) = Eigen::Map<const Vector>(frame.data(), frame.size());
  }
  return frames;
}

Matrix sample_spikes(const Vector& z_s, const Vector& z_b, const Vector& w_s2,
                     const Vector& w_b, const Vector& d, std::uint64_t seed) {
  if (z_s.size() != z_b.size()) throw ParameterError("sample_spikes: latent lengths differ");
  if (w_s2.size() != w_b.size() || w_s2.size() != d.size())
    throw ParameterError("sample_spikes: loading lengths differ");
  if (!w_s2.allFinite() || !w_b.allFinite() || !d.allFinite())
    throw ParameterError("sample_spikes: loadings must be finite");
  const Index n = w_s2.size();
  const Index t_bins = z_s.size();
  Rng rng(seed);
  Matrix counts(n, t_bins);
  for (Index t = 0; t < t_bins; ++t)
    for (Index i = 0; i < n; ++i) {
      const double rate = std::exp(w_s2[i] * z_s[t] + w_b[i] * z_b[t] + d[i]);
      counts(i, t) = static_cast<double>(rng.poisson(rate));
    }
  return counts;
}

Dataset simulate(const SimConfig& cfg) {
  cfg.validate();
  const Matrix glyph = load_template_glyph(cfg.template_path, cfg.image_side);

  Dataset data;
  data.t_bins = cfg.t_bins;
  data.m_dim = cfg.image_side * cfg.image_side;
  data.n_dim = cfg.neurons;
  data.p_true = 3;
  data.seed = cfg.seed;

  data.truth.latents = sample_gp_trajectories(cfg);

  // affine map from latent values to angles/scales: min-max over the trial set
  double z_s_lo = std::numeric_limits<double>::infinity(), z_s_hi = -z_s_lo;
  double z_a_lo = z_s_lo, z_a_hi = -z_s_lo;
  for (const Matrix& z : data.truth.latents) {
    z_a_lo = std::min(z_a_lo, z.row(0).minCoeff());
    z_a_hi = std::max(z_a_hi, z.row(0).maxCoeff());
    z_s_lo = std::min(z_s_lo, z.row(1).minCoeff());
    z_s_hi = std::max(z_s_hi, z.row(1).maxCoeff());
  }
  const double s_span = z_s_hi > z_s_lo ? z_s_hi - z_s_lo : 1.0;
  const double a_span = z_a_hi > z_a_lo ? z_a_hi - z_a_lo : 1.0;

  Rng rng_load(seed_stream(cfg.seed, kLoadingPurpose));
  data.truth.w_s2 = rng_load.normal_vector(cfg.neurons) * cfg.loading_scale;
  data.truth.w_b = rng_load.normal_vector(cfg.neurons) * cfg.loading_scale;
  data.truth.d = Vector::Constant(cfg.neurons, cfg.base_log_rate);

  data.trials.reserve(static_cast<std::size_t>(cfg.trials));
  for (Index i = 0; i < cfg.trials; ++i) {
    const Matrix& z = data.truth.latents[static_cast<std::size_t>(i)];
    const Vector angles =
        (cfg.angle_lo_deg +
         (z.row(1).transpose().array() - z_s_lo) / s_span * (cfg.angle_hi_deg - cfg.angle_lo_deg))
            .matrix();
    const Vector scales =
        (cfg.scale_lo +
         (z.row(0).transpose().array() - z_a_lo) / a_span * (cfg.scale_hi - cfg.scale_lo))
            .matrix();
    Trial trial;
    trial.y_a = render_frames(angles, scales, glyph);
    data.truth.clean_images.push_back(trial.y_a);
    Matrix rates(cfg.neurons, cfg.t_bins);
    for (Index t = 0; t < cfg.t_bins; ++t)
      rates.col(t) = (data.truth.w_s2 * z(1, t) + data.truth.w_b * z(2, t) + data.truth.d)
                         .array()
                         .exp();
    trial.y_b = sample_spikes(z.row(1).transpose(), z.row(2).transpose(), data.truth.w_s2,
                              data.truth.w_b, data.truth.d,
                              seed_stream(cfg.seed, kSpikePurpose, static_cast<std::uint64_t>(i)));
    data.truth.rates.push_back(std::move(rates));
    data.trials.push_back(std::move(trial));
  }

  std::vector<Index> order(static_cast<std::size_t>(cfg.trials));
  for (Index i = 0; i < cfg.trials; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng_split(seed_stream(cfg.seed, kSplitPurpose));
  rng_split.shuffle(order);
  const Index n_train = static_cast<Index>(
      std::lround(cfg.train_fraction * static_cast<double>(cfg.trials)));
  data.train_idx.assign(order.begin(), order.begin() + n_train);
  data.test_idx.assign(order.begin() + n_train, order.end());
  std::sort(data.train_idx.begin(), data.train_idx.end());
  std::sort(data.test_idx.begin(), data.test_idx.end());
  return data;
}

}  // namespace mmgpvae
