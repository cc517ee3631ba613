#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/dataset.hpp"
#include "mmgpvae/encoder.hpp"
#include "mmgpvae/fourier_gp.hpp"
#include "mmgpvae/latent_model.hpp"
#include "mmgpvae/likelihoods.hpp"
#include "mmgpvae/nnet.hpp"

#include <string>
#include <vector>

namespace mmgpvae {

/// Training/ablation variants. The Fourier modes share one latent machinery;
/// the two baseline modes keep latents in the time domain with per-timepoint
/// mean-field posteriors (standard-normal prior for the plain VAE, dense GP
/// prior for the time-domain GP-VAE).
enum class Mode {
  kMultimodal,
  kGpvaeOnly,       // behavior modality only, Fourier latents
  kGpfaOnly,        // neural modality only, Fourier latents
  kVaeBaseline,     // behavior only, time domain, N(0, I) prior
  kTimedomainGpvae  // behavior only, time domain, dense GP prior
};

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct ModelConfig {
  Mode mode = Mode::kMultimodal;
  LatentPartition partition{1, 1, 1};
  Index t_bins = 60;
  Index f_bins = 0;  // 0: derive from the pruning rule
  double prune_ell_min = 10.0;
  double prune_mass = 0.999;
  double rho_init = 1.0;
  double ell_init = 30.0;
  double alpha = 1e-2;
  NeuralKind neural_kind = NeuralKind::kPoisson;
  double sigma_y2_init = 0.0;  // 0: mode default (100 multimodal, 1000 unimodal)
  double sigma_n2_init = 1.0;
  Index embed_dim = 0;  // 0: p_a + p_s
  std::vector<Index> enc_a_widths{128, 64};
  std::vector<Index> enc_b_widths{64, 32};
  std::vector<Index> dec_widths{64, 128};
  double variance_floor = 1e-6;
  double exp_clamp = 30.0;
  Index m_dim = 0;  // behavior observation dimension
  Index n_dim = 0;  // neural observation dimension

  bool has_behavior() const { return mode != Mode::kGpfaOnly; }
  bool has_neural() const { return mode == Mode::kMultimodal || mode == Mode::kGpfaOnly; }
  bool fourier() const {
    return mode == Mode::kMultimodal || mode == Mode::kGpvaeOnly || mode == Mode::kGpfaOnly;
  }
  bool gp_prior() const { return mode != Mode::kVaeBaseline; }
  Index effective_embed_dim() const {
    return embed_dim > 0 ? embed_dim : partition.behavior_rows();
  }
  Index effective_f_bins() const;
  double effective_sigma_y2_init() const {
    if (sigma_y2_init > 0.0) return sigma_y2_init;
    return mode == Mode::kMultimodal ? 100.0 : 1000.0;
  }
  void validate() const;
};

/// Named view of one learnable tensor; regenerate after any copy.
struct ParamEntry {
  std::string name;
  double* data;
  Index rows;
  Index cols;
  Index size() const { return rows * cols; }
};

/// All learnable state plus the fixed structure it binds to. Gradients reuse
/// the same type (zeros_like) so backward code writes into mirror members.
struct Model {
  ModelConfig cfg;
  FourierBasis basis;  // empty in time-domain modes

  Mlp enc_a;  // behavior per-timepoint encoder; two stacked heads (mu, pre-variance) in time-domain modes
  Mlp enc_b;  // neural per-timepoint encoder
  LinearMap l_mu, l_sigma;
  Mlp decoder;
  LoadingsMatrix loadings;
  Vector log_rho, log_ell;  // per latent; absent under the plain-VAE prior
  double log_sigma_y2 = 0.0;
  Vector log_sigma_n2;

  std::vector<ParamEntry> params();
  std::vector<ParamEntry> params() const;  // const views for read-only walks

  Model zeros_like() const;

  std::vector<Spectrum> spectra() const;  // Fourier modes only
  EncoderStack encoder_stack() const;
  BehaviorDecoder behavior_decoder() const;
  NeuralLikelihoodConfig neural_config() const;
  double sigma_y2() const { return std::exp(log_sigma_y2); }
};

/// Data-dependent initialization inputs (neural offsets start at the mean
/// log-rate of the training split).
struct DataStats {
  Vector neural_mean;  // per-neuron mean of Y_B over training trials and bins
};

DataStats compute_data_stats(const Dataset& data);

Model make_model(const ModelConfig& cfg, const DataStats& stats, std::uint64_t seed);

}  // namespace mmgpvae
