#pragma once

#include "mmgpvae/elbo.hpp"
#include "mmgpvae/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mmgpvae {

struct TrainConfig {
  Index epochs = 300;
  Index batch_size = 60;
  double step_size = 1e-3;
  std::uint64_t seed = 0;
  Index samples_per_trial = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (epochs < 0 || batch_size < 1 || samples_per_trial < 1)
      throw ConfigError("train: epochs >= 0, batch_size >= 1, samples >= 1 required");
    if (!(step_size > 0.0)) throw ConfigError("train: step_size must be > 0");
  }
};

struct AdamState {
  Model m;  // first-moment mirror
  Model v;  // second-moment mirror
  Index steps = 0;

  explicit AdamState(const Model& model) : m(model.zeros_like()), v(model.zeros_like()) {}

  /// Ascent step on the mean-batch gradient.
  void update(Model& params, const Model& grads, const TrainConfig& tc);
};

struct TraceRow {
  Index epoch = 0;
  ElboTerms terms;  // per-trial averages over the training split
};

struct TrainState {
  Model model;
  AdamState adam;
  Index epoch = 0;
  std::uint64_t seed = 0;
  std::vector<TraceRow> trace;

  explicit TrainState(Model m) : model(std::move(m)), adam(model) {}
};

/// Per-trial reparameterization noise; streams are derived from
/// (seed, epoch, trial id) so any batch schedule reproduces them.
NoiseBatch make_noise(const Model& model, std::span<const Index> trial_ids,
                      std::uint64_t seed, Index epoch, Index samples);

TrainState init_train_state(const Dataset& data, const ModelConfig& cfg,
                            const TrainConfig& tc);

/// Runs `n_epochs` additional epochs, appending to the state's trace.
/// Throws DivergenceError naming the first non-finite term.
void run_training(TrainState& state, const Dataset& data, const TrainConfig& tc,
                  Index n_epochs,
                  const std::function<void(const TraceRow&)>& on_epoch = {});

TrainState train(const Dataset& data, const ModelConfig& cfg, const TrainConfig& tc,
                 const std::function<void(const TraceRow&)>& on_epoch = {});

struct GradCheckGroup {
  std::string name;
  double rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  bool all_pass = false;
  double tolerance = 1e-4;
};

/// Central finite differences of the batch ELBO against the implemented
/// reverse pass, reported per parameter group (L2 relative error).
GradCheckReport grad_check(Model& model, std::span<const TrialRef> trials,
                           const NoiseBatch& noise, double fd_step = 1e-5,
                           double tolerance = 1e-4);

}  // namespace mmgpvae
