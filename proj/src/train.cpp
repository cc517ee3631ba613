#include "mmgpvae/train.hpp"

#include "mmgpvae/rng.hpp"

#include <cmath>

namespace mmgpvae {

namespace {
constexpr std::uint64_t kNoisePurpose = 0xA11CE;
constexpr std::uint64_t kShufflePurpose = 0x5AFFE;

const char* first_bad_term(const ElboTerms& t) {
  if (!std::isfinite(t.behavior)) return "behavior likelihood";
  if (!std::isfinite(t.neural)) return "neural likelihood";
  if (!std::isfinite(t.prior)) return "gp prior";
  if (!std::isfinite(t.entropy)) return "entropy";
  return nullptr;
}
}  // namespace

void AdamState::update(Model& params, const Model& grads, const TrainConfig& tc) {
  ++steps;
  const double b1 = tc.beta1, b2 = tc.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps));
  auto p_entries = params.params();
  const auto g_entries = grads.params();
  auto m_entries = m.params();
  auto v_entries = v.params();
  for (std::size_t e = 0; e < p_entries.size(); ++e) {
    double* p = p_entries[e].data;
    const double* g = g_entries[e].data;
    double* mm = m_entries[e].data;
    double* vv = v_entries[e].data;
    const Index n = p_entries[e].size();
    for (Index i = 0; i < n; ++i) {
      mm[i] = b1 * mm[i] + (1.0 - b1) * g[i];
      vv[i] = b2 * vv[i] + (1.0 - b2) * g[i] * g[i];
      p[i] += tc.step_size * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + tc.adam_eps);
    }
  }
}

NoiseBatch make_noise(const Model& model, std::span<const Index> trial_ids,
                      std::uint64_t seed, Index epoch, Index samples) {
  const Index p_total = model.cfg.partition.total();
  const Index f_eff = model.cfg.fourier() ? model.basis.f_bins : model.cfg.t_bins;
  NoiseBatch noise(trial_ids.size());
  for (std::size_t i = 0; i < trial_ids.size(); ++i) {
    Rng rng(seed_stream(seed, kNoisePurpose, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(trial_ids[i])));
    noise[i].reserve(static_cast<std::size_t>(samples));
    for (Index s = 0; s < samples; ++s) noise[i].push_back(rng.normal_matrix(p_total, f_eff));
  }
  return noise;
}

TrainState init_train_state(const Dataset& data, const ModelConfig& cfg,
                            const TrainConfig& tc) {
  tc.validate();
  if (data.trials.empty()) throw ParameterError("train: dataset is empty");
  ModelConfig bound = cfg;
  if (bound.m_dim == 0) bound.m_dim = data.m_dim;
  if (bound.n_dim == 0) bound.n_dim = data.n_dim;
  if (bound.t_bins != data.t_bins)
    throw ConfigError("train: model time_bins != dataset time_bins");
  TrainState state(make_model(bound, compute_data_stats(data), tc.seed));
  state.seed = tc.seed;
  return state;
}

void run_training(TrainState& state, const Dataset& data, const TrainConfig& tc,
                  Index n_epochs, const std::function<void(const TraceRow&)>& on_epoch) {
  tc.validate();
  std::vector<Index> order = data.train_idx;
  if (order.empty())
    throw ParameterError("train: dataset has no training split");
  const Index n_train = static_cast<Index>(order.size());
  const bool sampled = state.model.cfg.has_behavior() ||
                       (state.model.cfg.has_neural() &&
                        state.model.cfg.neural_kind == NeuralKind::kGaussian);

  for (Index e = 0; e < n_epochs; ++e) {
    const Index epoch = state.epoch;
    Rng shuffle_rng(seed_stream(state.seed, kShufflePurpose, static_cast<std::uint64_t>(epoch)));
    order = data.train_idx;
    shuffle_rng.shuffle(order);

    ElboTerms epoch_sum;
    for (Index start = 0; start < n_train; start += tc.batch_size) {
      const Index count = std::min(tc.batch_size, n_train - start);
      const std::span<const Index> ids(order.data() + start,
                                       static_cast<std::size_t>(count));
      const auto refs = make_trial_refs(data, ids);
      const NoiseBatch noise =
          sampled ? make_noise(state.model, ids, state.seed, epoch, tc.samples_per_trial)
                  : NoiseBatch(ids.size());
      Model grads = state.model.zeros_like();
      std::vector<ElboTerms> per_trial;
      const ElboTerms batch_terms =
          elbo_batch(state.model, refs, noise, &grads, &per_trial);
      if (const char* bad = first_bad_term(batch_terms))
        throw DivergenceError("non-finite " + std::string(bad) + " at epoch " +
                              std::to_string(epoch));
      epoch_sum += batch_terms;
      const double scale = 1.0 / static_cast<double>(count);
      for (auto& entry : grads.params())
        for (Index i = 0; i < entry.size(); ++i) entry.data[i] *= scale;
      state.adam.update(state.model, grads, tc);
    }

    TraceRow row;
    row.epoch = epoch;
    const double inv_n = 1.0 / static_cast<double>(n_train);
    row.terms.behavior = epoch_sum.behavior * inv_n;
    row.terms.neural = epoch_sum.neural * inv_n;
    row.terms.prior = epoch_sum.prior * inv_n;
    row.terms.entropy = epoch_sum.entropy * inv_n;
    state.trace.push_back(row);
    state.epoch = epoch + 1;
    if (on_epoch) on_epoch(row);
  }
}

TrainState train(const Dataset& data, const ModelConfig& cfg, const TrainConfig& tc,
                 const std::function<void(const TraceRow&)>& on_epoch) {
  TrainState state = init_train_state(data, cfg, tc);
  run_training(state, data, tc, tc.epochs, on_epoch);
  return state;
}

GradCheckReport grad_check(Model& model, std::span<const TrialRef> trials,
                           const NoiseBatch& noise, double fd_step, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  Model analytic = model.zeros_like();
  elbo_batch(model, trials, noise, &analytic);

  auto entries = model.params();
  const auto grad_entries = analytic.params();
  report.all_pass = true;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    double num2 = 0.0, an2 = 0.0, diff2 = 0.0;
    for (Index i = 0; i < entries[e].size(); ++i) {
      double& x = entries[e].data[i];
      const double saved = x;
      x = saved + fd_step;
      const double up = elbo_batch(model, trials, noise).total();
      x = saved - fd_step;
      const double down = elbo_batch(model, trials, noise).total();
      x = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double an = grad_entries[e].data[i];
      num2 += fd * fd;
      an2 += an * an;
      diff2 += (fd - an) * (fd - an);
    }
    GradCheckGroup group;
    group.name = entries[e].name;
    const double denom = std::max({std::sqrt(num2), std::sqrt(an2), 1e-8});
    group.rel_err = std::sqrt(diff2) / denom;
    group.pass = group.rel_err <= tolerance;
    report.all_pass = report.all_pass && group.pass;
    report.groups.push_back(group);
  }
  return report;
}

}  // namespace mmgpvae
