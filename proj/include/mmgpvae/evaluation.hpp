#pragma once

#include "mmgpvae/dataset.hpp"
#include "mmgpvae/model.hpp"
#include "mmgpvae/train.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmgpvae {

/// Affine map est -> truth fitted by least squares; falls back to the
/// pseudoinverse (with a stderr warning) when the normal equations are
/// rank-deficient.
struct AlignmentMap {
  Matrix a;
  Vector b;
  bool rank_deficient = false;
};

AlignmentMap fit_affine(const Matrix& est, const Matrix& truth);
Matrix apply_affine(const AlignmentMap& map, const Matrix& est);

/// Posterior means of one trial (noise-free encode).
VariationalPosterior posterior_means(const Model& model, const Trial& trial);

/// Time-domain latent means, P x T.
Matrix latent_means(const Model& model, const VariationalPosterior& post);

/// Decoded behavior means g(x_A) from time-domain latents.
Matrix decode_behavior(const Model& model, const Matrix& z);

/// Neural rates exp(m) at the posterior mean embedding.
Matrix decode_rates(const Model& model, const Matrix& z);

/// Held-out latent recovery. Alignment maps are fitted per subspace block on
/// the supplied trials jointly; per-trial MSEs follow. For models whose block
/// identity is ambiguous (single-modality ablations), every latent row is also
/// scored against the true shared latent and the best candidate reported.
struct LatentEval {
  std::vector<Index> trial_ids;
  std::vector<double> mse_behavior;  // empty when the block or truth is absent
  std::vector<double> mse_shared;
  std::vector<double> mse_neural;
  std::vector<double> best_shared_mse;
  Index best_shared_row = -1;
  std::vector<Matrix> aligned;  // per trial, blockwise-aligned latents (P x T)
  double true_shared_variance = 0.0;
};

LatentEval evaluate_latents(const Model& model, const Dataset& data,
                            std::span<const Index> ids);

/// Reconstruction quality from posterior means, plus a deterministic
/// (zero-noise) per-trial ELBO. NaN marks inapplicable metrics.
struct ReconEval {
  std::vector<Index> trial_ids;
  std::vector<double> image_mse;
  std::vector<double> rate_mse;
  std::vector<double> elbo;
};

ReconEval reconstruction_metrics(const Model& model, const Dataset& data,
                                 std::span<const Index> ids);

/// Per-trial variance of the reconstruction driven by one latent block at a
/// time (other blocks zeroed, offsets kept). Columns: behavior-only, shared,
/// neural-only; NaN where a block does not feed the modality.
struct SubspaceVariance {
  std::vector<Index> trial_ids;
  Matrix behavior;  // n_trials x 3
  Matrix neural;    // n_trials x 3
};

SubspaceVariance subspace_variance(const Model& model, const Dataset& data,
                                   std::span<const Index> ids);

/// One-sided paired sign test: wins counts entries where `x` is strictly
/// smaller (better) than `y`; ties are dropped.
struct SignTest {
  int n = 0;
  int wins = 0;
  double p = 1.0;
};

SignTest paired_sign_test(std::span<const double> x, std::span<const double> y);

struct CompareSpec {
  std::vector<Mode> modes;
  int n_seeds = 3;
  std::uint64_t base_seed = 0;
  ModelConfig base_config;  // partition interpreted for the multimodal case
  TrainConfig train_config;
};

struct CompareMetricRow {
  std::string model;
  int seed = 0;
  Index trial = 0;
  std::string metric;
  double value = 0.0;
};

struct ComparePair {
  std::string metric;
  std::string model_x;
  std::string model_y;
  SignTest x_better;  // wins where x's per-trial value < y's
};

struct CompareResult {
  std::vector<std::string> labels;  // one per requested mode, duplicates suffixed
  std::vector<CompareMetricRow> rows;
  std::vector<ComparePair> tests;
};

/// Trains every requested mode over a shared seed ladder on the dataset's
/// split, evaluates held-out trials, and runs pairwise sign tests pooled
/// across seeds. `on_fit`, when set, sees each fitted model.
using CompareCallback = std::function<void(const std::string& label, int seed,
                                           const TrainState& state, const LatentEval& lat,
                                           const ReconEval& recon)>;

CompareResult compare_models(const Dataset& data, const CompareSpec& spec,
                             const CompareCallback& on_fit = {});

/// Derives the per-mode config from a shared base (identical settings, only
/// the ablated modality's latents dropped).
ModelConfig config_for_mode(const ModelConfig& base, Mode mode);

}  // namespace mmgpvae
