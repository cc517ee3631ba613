#include "mmgpvae/model.hpp"

namespace mmgpvae {

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kMultimodal: return "multimodal";
    case Mode::kGpvaeOnly: return "gpvae_only";
    case Mode::kGpfaOnly: return "gpfa_only";
    case Mode::kVaeBaseline: return "vae_baseline";
    case Mode::kTimedomainGpvae: return "timedomain_gpvae";
  }
  throw ParameterError("mode_name: unknown mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "multimodal") return Mode::kMultimodal;
  if (name == "gpvae_only") return Mode::kGpvaeOnly;
  if (name == "gpfa_only") return Mode::kGpfaOnly;
  if (name == "vae_baseline") return Mode::kVaeBaseline;
  if (name == "timedomain_gpvae") return Mode::kTimedomainGpvae;
  throw ConfigError("unknown mode: " + name);
}

Index ModelConfig::effective_f_bins() const {
  if (!fourier()) return t_bins;
  if (f_bins > 0) return f_bins;
  return prune_count(prune_ell_min, t_bins, prune_mass);
}

void ModelConfig::validate() const {
  partition.validate();
  if (t_bins < 3) throw ConfigError("model: time_bins must be >= 3 (F >= 3 required)");
  if (f_bins < 0 || f_bins > t_bins) throw ConfigError("model: freq_bins must lie in [0, T]");
  if (!(alpha >= 0.0)) throw ConfigError("model: alpha must be >= 0");
  if (!(rho_init > 0.0) || !(ell_init > 0.0))
    throw ConfigError("model: kernel inits must be > 0");
  if (mode == Mode::kGpfaOnly && partition.p_a != 0)
    throw ConfigError("model: gpfa_only requires p_a = 0");
  if (!has_neural() && partition.p_b != 0)
    throw ConfigError("model: behavior-only modes require p_b = 0");
  if (has_behavior() && m_dim < 1) throw ConfigError("model: behavior dimension unset");
  if (has_neural() && n_dim < 1) throw ConfigError("model: neural dimension unset");
  if (has_behavior() && partition.behavior_rows() < 1)
    throw ConfigError("model: behavior modality present but p_a + p_s = 0");
  if (has_neural() && partition.neural_rows() < 1)
    throw ConfigError("model: neural modality present but p_s + p_b = 0");
  if (!(variance_floor > 0.0)) throw ConfigError("model: variance_floor must be > 0");
}

namespace {

void push_mlp(std::vector<ParamEntry>& out, const std::string& prefix, const Mlp& net) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto& w = const_cast<Matrix&>(net.weights[l]);
    auto& b = const_cast<Vector&>(net.biases[l]);
    out.push_back({prefix + ".w" + std::to_string(l), w.data(), w.rows(), w.cols()});
    out.push_back({prefix + ".b" + std::to_string(l), b.data(), b.size(), 1});
  }
}

void push_mat(std::vector<ParamEntry>& out, const std::string& name, const Matrix& m) {
  if (m.size() == 0) return;
  auto& mm = const_cast<Matrix&>(m);
  out.push_back({name, mm.data(), mm.rows(), mm.cols()});
}

void push_vec(std::vector<ParamEntry>& out, const std::string& name, const Vector& v) {
  if (v.size() == 0) return;
  auto& vv = const_cast<Vector&>(v);
  out.push_back({name, vv.data(), vv.size(), 1});
}

std::vector<ParamEntry> collect_params(const Model& model) {
  std::vector<ParamEntry> out;
  const ModelConfig& cfg = model.cfg;
  if (cfg.has_behavior()) push_mlp(out, "enc_a", model.enc_a);
  if (cfg.has_neural()) push_mlp(out, "enc_b", model.enc_b);
  if (cfg.fourier()) {
    push_mat(out, "l_mu.w", model.l_mu.weight);
    push_vec(out, "l_mu.b", model.l_mu.bias);
    push_mat(out, "l_sigma.w", model.l_sigma.weight);
    push_vec(out, "l_sigma.b", model.l_sigma.bias);
  }
  if (cfg.has_behavior()) {
    push_mlp(out, "dec", model.decoder);
    push_mat(out, "loadings.w_a", model.loadings.w_a);
    push_mat(out, "loadings.w_s1", model.loadings.w_s1);
    push_vec(out, "loadings.d_a", model.loadings.d_a);
    auto& s = const_cast<double&>(model.log_sigma_y2);
    out.push_back({"noise.log_sigma_y2", &s, 1, 1});
  }
  if (cfg.has_neural()) {
    push_mat(out, "loadings.w_s2", model.loadings.w_s2);
    push_mat(out, "loadings.w_b", model.loadings.w_b);
    push_vec(out, "loadings.d_b", model.loadings.d_b);
    if (cfg.neural_kind == NeuralKind::kGaussian)
      push_vec(out, "noise.log_sigma_n2", model.log_sigma_n2);
  }
  if (cfg.gp_prior()) {
    push_vec(out, "kernel.log_rho", model.log_rho);
    push_vec(out, "kernel.log_ell", model.log_ell);
  }
  return out;
}

}  // namespace

std::vector<ParamEntry> Model::params() { return collect_params(*this); }
std::vector<ParamEntry> Model::params() const { return collect_params(*this); }

Model Model::zeros_like() const {
  Model z = *this;
  for (auto& entry : z.params())
    for (Index i = 0; i < entry.size(); ++i) entry.data[i] = 0.0;
  return z;
}

std::vector<Spectrum> Model::spectra() const {
  if (!cfg.fourier()) throw ParameterError("Model::spectra: not a Fourier-mode model");
  std::vector<Spectrum> out;
  out.reserve(static_cast<std::size_t>(cfg.partition.total()));
  for (Index p = 0; p < cfg.partition.total(); ++p) {
    KernelParams kp{std::exp(log_rho[p]), std::exp(log_ell[p]), cfg.alpha};
    out.push_back(kernel_spectrum(kp, basis));
  }
  return out;
}

EncoderStack Model::encoder_stack() const {
  EncoderStack stack;
  stack.enc_a = cfg.has_behavior() ? &enc_a : nullptr;
  stack.enc_b = cfg.has_neural() ? &enc_b : nullptr;
  stack.l_mu = cfg.fourier() ? &l_mu : nullptr;
  stack.l_sigma = cfg.fourier() ? &l_sigma : nullptr;
  stack.variance_floor = cfg.variance_floor;
  return stack;
}

BehaviorDecoder Model::behavior_decoder() const {
  return BehaviorDecoder{&decoder, sigma_y2()};
}

NeuralLikelihoodConfig Model::neural_config() const {
  NeuralLikelihoodConfig nc;
  nc.kind = cfg.neural_kind;
  if (cfg.neural_kind == NeuralKind::kGaussian)
    nc.sigma_n2 = log_sigma_n2.array().exp();
  return nc;
}

DataStats compute_data_stats(const Dataset& data) {
  DataStats stats;
  if (data.trials.empty() || data.trials.front().y_b.size() == 0) return stats;
  const Index n = data.trials.front().y_b.rows();
  stats.neural_mean = Vector::Zero(n);
  double bins = 0.0;
  const auto& idx = data.train_idx.empty() ? data.test_idx : data.train_idx;
  for (Index i : idx) {
    stats.neural_mean += data.trials[static_cast<std::size_t>(i)].y_b.rowwise().sum();
    bins += static_cast<double>(data.trials[static_cast<std::size_t>(i)].y_b.cols());
  }
  if (bins > 0) stats.neural_mean /= bins;
  return stats;
}

Model make_model(const ModelConfig& cfg, const DataStats& stats, std::uint64_t seed) {
  cfg.validate();
  Model model;
  model.cfg = cfg;
  const LatentPartition& part = cfg.partition;
  const Index p_total = part.total();
  const Index f_eff = cfg.effective_f_bins();

  if (cfg.fourier()) model.basis = build_fourier_basis(cfg.t_bins, f_eff);

  if (cfg.has_behavior()) {
    Rng rng(seed_stream(seed, 1));
    // Time-domain modes stack a mean head over a pre-variance head.
    const Index out = cfg.fourier() ? part.behavior_rows() : 2 * part.behavior_rows();
    model.enc_a = Mlp::make(cfg.m_dim, cfg.enc_a_widths, out, rng);
  }
  if (cfg.has_neural()) {
    Rng rng(seed_stream(seed, 2));
    model.enc_b = Mlp::make(cfg.n_dim, cfg.enc_b_widths, part.neural_rows(), rng);
  }
  if (cfg.fourier()) {
    Rng rng(seed_stream(seed, 3));
    model.l_mu.weight = model.basis.rows;  // start at the exact analysis map
    model.l_mu.bias = Vector::Zero(f_eff);
    model.l_sigma.weight =
        rng.normal_matrix(f_eff, cfg.t_bins) / std::sqrt(static_cast<double>(cfg.t_bins));
    model.l_sigma.bias = Vector::Zero(f_eff);
  }

  const double w_scale = 0.1 / std::sqrt(static_cast<double>(p_total));
  Rng rng_load(seed_stream(seed, 4));
  const Index m_emb = cfg.effective_embed_dim();
  if (cfg.has_behavior()) {
    Rng rng_dec(seed_stream(seed, 5));
    model.decoder = Mlp::make(m_emb, cfg.dec_widths, cfg.m_dim, rng_dec);
    if (m_emb == part.behavior_rows()) {
      // [W_A | W_S1] starts as the identity: the embedding is the latents.
      model.loadings.w_a = Matrix::Identity(m_emb, m_emb).leftCols(part.p_a);
      model.loadings.w_s1 = Matrix::Identity(m_emb, m_emb).rightCols(part.p_s);
    } else {
      model.loadings.w_a = rng_load.normal_matrix(m_emb, part.p_a) * w_scale;
      model.loadings.w_s1 = rng_load.normal_matrix(m_emb, part.p_s) * w_scale;
    }
    model.loadings.d_a = Vector::Zero(m_emb);
    model.log_sigma_y2 = std::log(cfg.effective_sigma_y2_init());
  } else {
    model.loadings.w_a.resize(0, part.p_a);
    model.loadings.w_s1.resize(0, part.p_s);
    model.loadings.d_a.resize(0);
  }

  if (cfg.has_neural()) {
    model.loadings.w_s2 = rng_load.normal_matrix(cfg.n_dim, part.p_s) * w_scale;
    model.loadings.w_b = rng_load.normal_matrix(cfg.n_dim, part.p_b) * w_scale;
    if (cfg.neural_kind == NeuralKind::kPoisson && stats.neural_mean.size() == cfg.n_dim) {
      model.loadings.d_b =
          (stats.neural_mean.array() + 1e-3).log().matrix();  // mean log-rate start
    } else if (stats.neural_mean.size() == cfg.n_dim) {
      model.loadings.d_b = stats.neural_mean;  // gaussian traces: plain mean
    } else {
      model.loadings.d_b = Vector::Zero(cfg.n_dim);
    }
    if (cfg.neural_kind == NeuralKind::kGaussian)
      model.log_sigma_n2 = Vector::Constant(cfg.n_dim, std::log(cfg.sigma_n2_init));
  } else {
    model.loadings.w_s2.resize(0, part.p_s);
    model.loadings.w_b.resize(0, part.p_b);
    model.loadings.d_b.resize(0);
  }

  if (cfg.gp_prior()) {
    model.log_rho = Vector::Constant(p_total, std::log(cfg.rho_init));
    model.log_ell = Vector::Constant(p_total, std::log(cfg.ell_init));
  }
  return model;
}

}  // namespace mmgpvae
