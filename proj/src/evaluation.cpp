#include "mmgpvae/evaluation.hpp"

#include "mmgpvae/elbo.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <map>

namespace mmgpvae {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mse(const Matrix& a, const Matrix& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}
}  // namespace

AlignmentMap fit_affine(const Matrix& est, const Matrix& truth) {
  if (est.cols() != truth.cols()) throw ParameterError("fit_affine: column counts differ");
  const Index p = est.rows();
  const Index n = est.cols();
  Matrix x(p + 1, n);
  x.topRows(p) = est;
  x.row(p).setOnes();
  const Matrix gram = x * x.transpose();            // (p+1) x (p+1)
  const Matrix xy = truth * x.transpose();          // q x (p+1)
  Eigen::LDLT<Matrix> ldlt(gram);
  AlignmentMap map;
  const double rcond_guard = 1e-10 * gram.diagonal().maxCoeff();
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array().abs() < rcond_guard).any()) {
    map.rank_deficient = true;
    std::cerr << "fit_affine: rank-deficient regression, using pseudoinverse\n";
    const Matrix pinv =
        gram.completeOrthogonalDecomposition().pseudoInverse();
    const Matrix coeff = xy * pinv;
    map.a = coeff.leftCols(p);
    map.b = coeff.col(p);
    return map;
  }
  const Matrix coeff = ldlt.solve(xy.transpose()).transpose();
  map.a = coeff.leftCols(p);
  map.b = coeff.col(p);
  return map;
}

Matrix apply_affine(const AlignmentMap& map, const Matrix& est) {
  return (map.a * est).colwise() + map.b;
}

VariationalPosterior posterior_means(const Model& model, const Trial& trial) {
  return encode_trial(trial.y_a, trial.y_b, model.encoder_stack(), model.cfg.partition);
}

Matrix latent_means(const Model& model, const VariationalPosterior& post) {
  return model.cfg.fourier() ? to_time_domain(post.mu, model.basis) : post.mu;
}

Matrix decode_behavior(const Model& model, const Matrix& z) {
  if (!model.cfg.has_behavior())
    throw ParameterError("decode_behavior: model has no behavior modality");
  auto [x_a, x_b] = mix_latents(z, model.loadings, model.cfg.partition);
  return mlp_forward(model.decoder, x_a);
}

Matrix decode_rates(const Model& model, const Matrix& z) {
  if (!model.cfg.has_neural())
    throw ParameterError("decode_rates: model has no neural modality");
  auto [x_a, x_b] = mix_latents(z, model.loadings, model.cfg.partition);
  return x_b.array().exp();
}

namespace {

// Gathers one latent block across trials into a (rows x trials*T) matrix.
Matrix stack_block(const std::vector<Matrix>& mats, Index row0, Index rows) {
  if (mats.empty() || rows == 0) return Matrix(rows, 0);
  const Index t_bins = mats.front().cols();
  Matrix out(rows, t_bins * static_cast<Index>(mats.size()));
  for (std::size_t i = 0; i < mats.size(); ++i)
    out.middleCols(static_cast<Index>(i) * t_bins, t_bins) = mats[i].middleRows(row0, rows);
  return out;
}

std::vector<double> per_trial_mse(const Matrix& aligned, const Matrix& truth, Index t_bins) {
  const Index n = aligned.cols() / t_bins;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out.push_back(mse(aligned.middleCols(i * t_bins, t_bins),
                      truth.middleCols(i * t_bins, t_bins)));
  return out;
}

}  // namespace

LatentEval evaluate_latents(const Model& model, const Dataset& data,
                            std::span<const Index> ids) {
  LatentEval eval;
  eval.trial_ids.assign(ids.begin(), ids.end());
  if (!data.truth.has_latents() || ids.empty()) return eval;
  if (data.p_true != 3)
    throw ParameterError("evaluate_latents: expected 3 ground-truth latent rows");

  const Index t_bins = data.t_bins;
  std::vector<Matrix> est, truth;
  est.reserve(ids.size());
  truth.reserve(ids.size());
  for (Index id : ids) {
    const Trial& trial = data.trials.at(static_cast<std::size_t>(id));
    est.push_back(latent_means(model, posterior_means(model, trial)));
    truth.push_back(data.truth.latents.at(static_cast<std::size_t>(id)));
  }

  const LatentPartition& part = model.cfg.partition;
  const Matrix truth_a = stack_block(truth, 0, 1);
  const Matrix truth_s = stack_block(truth, 1, 1);
  const Matrix truth_b = stack_block(truth, 2, 1);

  const Matrix s_centered = truth_s.array() - truth_s.mean();
  eval.true_shared_variance = s_centered.squaredNorm() / static_cast<double>(truth_s.size());

  // aligned[i] holds the aligned estimate for each TRUE latent row (3 x T);
  // rows stay NaN when the model has no corresponding block
  for (std::size_t i = 0; i < ids.size(); ++i)
    eval.aligned.push_back(Matrix::Constant(3, t_bins, kNan));

  auto align_block = [&](Index row0, Index rows, const Matrix& truth_block, Index truth_row,
                         std::vector<double>& out_mse) {
    if (rows == 0) return;
    const Matrix est_block = stack_block(est, row0, rows);
    const AlignmentMap map = fit_affine(est_block, truth_block);
    const Matrix aligned = apply_affine(map, est_block);
    out_mse = per_trial_mse(aligned, truth_block, t_bins);
    for (std::size_t i = 0; i < ids.size(); ++i)
      eval.aligned[i].row(truth_row) =
          aligned.middleCols(static_cast<Index>(i) * t_bins, t_bins).row(0);
  };

  align_block(0, part.p_a, truth_a, 0, eval.mse_behavior);
  align_block(part.p_a, part.p_s, truth_s, 1, eval.mse_shared);
  align_block(part.p_a + part.p_s, part.p_b, truth_b, 2, eval.mse_neural);

  // best-candidate scoring against the true shared latent (single-modality
  // models cannot label which of their latents is shared)
  double best = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < part.total(); ++r) {
    const Matrix row = stack_block(est, r, 1);
    const AlignmentMap map = fit_affine(row, truth_s);
    const Matrix aligned = apply_affine(map, row);
    const double total = mse(aligned, truth_s);
    if (total < best) {
      best = total;
      eval.best_shared_row = r;
      eval.best_shared_mse = per_trial_mse(aligned, truth_s, t_bins);
    }
  }
  return eval;
}

ReconEval reconstruction_metrics(const Model& model, const Dataset& data,
                                 std::span<const Index> ids) {
  ReconEval eval;
  eval.trial_ids.assign(ids.begin(), ids.end());
  const Index p_total = model.cfg.partition.total();
  const Index f_eff = model.cfg.fourier() ? model.basis.f_bins : model.cfg.t_bins;
  const bool needs_noise =
      model.cfg.has_behavior() ||
      (model.cfg.has_neural() && model.cfg.neural_kind == NeuralKind::kGaussian);

  for (Index id : ids) {
    const Trial& trial = data.trials.at(static_cast<std::size_t>(id));
    const VariationalPosterior post = posterior_means(model, trial);
    const Matrix z = latent_means(model, post);

    double image_mse = kNan;
    if (model.cfg.has_behavior() && data.truth.has_clean_images())
      image_mse =
          mse(decode_behavior(model, z), data.truth.clean_images.at(static_cast<std::size_t>(id)));
    eval.image_mse.push_back(image_mse);

    double rate_mse = kNan;
    if (model.cfg.has_neural() && data.truth.has_rates())
      rate_mse = mse(decode_rates(model, z), data.truth.rates.at(static_cast<std::size_t>(id)));
    eval.rate_mse.push_back(rate_mse);

    const TrialRef ref{&trial.y_a, &trial.y_b};
    NoiseBatch noise(1);
    if (needs_noise) noise[0].push_back(Matrix::Zero(p_total, f_eff));
    eval.elbo.push_back(elbo_batch(model, std::span<const TrialRef>(&ref, 1), noise).total());
  }
  return eval;
}

SubspaceVariance subspace_variance(const Model& model, const Dataset& data,
                                   std::span<const Index> ids) {
  SubspaceVariance sv;
  sv.trial_ids.assign(ids.begin(), ids.end());
  const Index n = static_cast<Index>(ids.size());
  sv.behavior = Matrix::Constant(n, 3, kNan);
  sv.neural = Matrix::Constant(n, 3, kNan);
  const LatentPartition& part = model.cfg.partition;

  auto variance_of = [](const Matrix& recon) {
    // mean over dimensions of the per-dimension variance across time
    const Index t_bins = recon.cols();
    const Vector means = recon.rowwise().mean();
    const Matrix centered = recon.colwise() - means;
    return centered.squaredNorm() /
           static_cast<double>(recon.rows() * t_bins);
  };

  for (Index i = 0; i < n; ++i) {
    const Trial& trial = data.trials.at(static_cast<std::size_t>(ids[i]));
    const Matrix z = latent_means(model, posterior_means(model, trial));
    const Index block_row[3] = {0, part.p_a, part.p_a + part.p_s};
    const Index block_len[3] = {part.p_a, part.p_s, part.p_b};
    for (int blk = 0; blk < 3; ++blk) {
      if (block_len[blk] == 0) continue;
      Matrix masked = Matrix::Zero(z.rows(), z.cols());
      masked.middleRows(block_row[blk], block_len[blk]) =
          z.middleRows(block_row[blk], block_len[blk]);
      const bool feeds_behavior = blk <= 1 && model.cfg.has_behavior();
      const bool feeds_neural = blk >= 1 && model.cfg.has_neural();
      if (feeds_behavior) sv.behavior(i, blk) = variance_of(decode_behavior(model, masked));
      if (feeds_neural) sv.neural(i, blk) = variance_of(decode_rates(model, masked));
    }
  }
  return sv;
}

SignTest paired_sign_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("paired_sign_test: length mismatch");
  SignTest st;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i]) || x[i] == y[i]) continue;
    ++st.n;
    if (x[i] < y[i]) ++st.wins;
  }
  if (st.n == 0) {
    st.p = 1.0;
    return st;
  }
  // one-sided binomial tail P[Bin(n, 1/2) >= wins]
  double p = 0.0;
  const double log_half_n = -static_cast<double>(st.n) * std::log(2.0);
  for (int k = st.wins; k <= st.n; ++k) {
    const double log_choose = std::lgamma(st.n + 1.0) - std::lgamma(k + 1.0) -
                              std::lgamma(st.n - k + 1.0);
    p += std::exp(log_choose + log_half_n);
  }
  st.p = std::min(p, 1.0);
  return st;
}

ModelConfig config_for_mode(const ModelConfig& base, Mode mode) {
  ModelConfig cfg = base;
  cfg.mode = mode;
  if (!cfg.has_behavior()) cfg.partition.p_a = 0;
  if (!cfg.has_neural()) cfg.partition.p_b = 0;
  return cfg;
}

CompareResult compare_models(const Dataset& data, const CompareSpec& spec,
                             const CompareCallback& on_fit) {
  if (spec.modes.size() < 2)
    throw ParameterError("compare_models: need at least two modes");
  if (spec.n_seeds < 1) throw ParameterError("compare_models: need at least one seed");
  if (spec.n_seeds == 1)
    std::cerr << "compare_models: seed ladder of length 1; statistics will be weak\n";

  CompareResult result;
  std::map<std::string, int> seen;
  for (Mode mode : spec.modes) {
    std::string label = mode_name(mode);
    const int k = ++seen[label];
    if (k > 1) label += "#" + std::to_string(k);
    result.labels.push_back(label);
  }

  // per label/metric, per-trial values pooled over seeds (aligned by position)
  std::map<std::string, std::map<std::string, std::vector<double>>> pooled;

  for (std::size_t m = 0; m < spec.modes.size(); ++m) {
    const Mode mode = spec.modes[m];
    const std::string& label = result.labels[m];
    const ModelConfig cfg = config_for_mode(spec.base_config, mode);
    for (int s = 0; s < spec.n_seeds; ++s) {
      TrainConfig tc = spec.train_config;
      tc.seed = spec.base_seed + static_cast<std::uint64_t>(s);
      const TrainState state = train(data, cfg, tc);
      const LatentEval lat = evaluate_latents(state.model, data, data.test_idx);
      const ReconEval recon = reconstruction_metrics(state.model, data, data.test_idx);
      if (on_fit) on_fit(label, s, state, lat, recon);

      // the multimodal model reports its designated shared latent; the
      // single-modality ablations report their best candidate row
      const std::vector<double>& shared =
          (mode == Mode::kMultimodal) ? lat.mse_shared : lat.best_shared_mse;
      for (std::size_t i = 0; i < data.test_idx.size(); ++i) {
        const Index trial = data.test_idx[i];
        auto push = [&](const std::string& metric, double v) {
          if (std::isnan(v)) return;
          result.rows.push_back({label, s, trial, metric, v});
          pooled[label][metric].push_back(v);
        };
        if (i < shared.size()) push("shared_latent_mse", shared[i]);
        push("image_mse", recon.image_mse[i]);
        push("rate_mse", recon.rate_mse[i]);
        push("elbo", recon.elbo[i]);
      }
    }
  }

  for (std::size_t i = 0; i < result.labels.size(); ++i)
    for (std::size_t j = i + 1; j < result.labels.size(); ++j)
      for (const std::string metric : {"shared_latent_mse", "image_mse", "rate_mse"}) {
        const auto& mi = pooled[result.labels[i]];
        const auto& mj = pooled[result.labels[j]];
        if (!mi.count(metric) || !mj.count(metric)) continue;
        const auto& vx = mi.at(metric);
        const auto& vy = mj.at(metric);
        if (vx.size() != vy.size()) continue;
        ComparePair pair;
        pair.metric = metric;
        pair.model_x = result.labels[i];
        pair.model_y = result.labels[j];
        pair.x_better = paired_sign_test(vx, vy);
        result.tests.push_back(pair);
      }
  return result;
}

}  // namespace mmgpvae
