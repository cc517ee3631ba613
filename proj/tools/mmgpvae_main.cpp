#include "mmgpvae/config.hpp"
#include "mmgpvae/elbo.hpp"
#include "mmgpvae/evaluation.hpp"
#include "mmgpvae/io.hpp"
#include "mmgpvae/simulation.hpp"
#include "mmgpvae/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace mmgpvae;
namespace fs = std::filesystem;

void apply_thread_cap() {
  if (const char* env = std::getenv("MMGPVAE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) Eigen::setNbThreads(n);
  }
}

std::vector<std::vector<std::string>> trace_rows(const std::vector<TraceRow>& trace) {
  std::vector<std::vector<std::string>> rows;
  for (const TraceRow& r : trace)
    rows.push_back({std::to_string(r.epoch), format_double(r.terms.total()),
                    format_double(r.terms.behavior), format_double(r.terms.neural),
                    format_double(r.terms.prior), format_double(r.terms.entropy)});
  return rows;
}

const std::vector<std::string> kTraceHeader = {"epoch",  "elbo",  "behavior",
                                               "neural", "prior", "entropy"};

void write_eval_csvs(const std::string& out_dir, const Model& model, const Dataset& data,
                     const std::vector<Index>& ids, const std::string& split_name,
                     bool train_warning) {
  const LatentEval lat = evaluate_latents(model, data, ids);
  const ReconEval recon = reconstruction_metrics(model, data, ids);

  std::vector<std::vector<std::string>> rows;
  std::map<std::string, std::pair<double, std::vector<double>>> pools;
  auto push = [&](Index trial, const std::string& metric, double v) {
    if (std::isnan(v)) return;
    rows.push_back({std::to_string(trial), split_name, train_warning ? "1" : "0", metric,
                    format_double(v)});
    pools[metric].second.push_back(v);
  };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Index trial = ids[i];
    if (i < lat.mse_behavior.size()) push(trial, "latent_mse_behavior", lat.mse_behavior[i]);
    if (i < lat.mse_shared.size()) push(trial, "latent_mse_shared", lat.mse_shared[i]);
    if (i < lat.mse_neural.size()) push(trial, "latent_mse_neural", lat.mse_neural[i]);
    if (i < lat.best_shared_mse.size())
      push(trial, "best_shared_latent_mse", lat.best_shared_mse[i]);
    push(trial, "image_mse", recon.image_mse[i]);
    push(trial, "rate_mse", recon.rate_mse[i]);
    push(trial, "elbo", recon.elbo[i]);
  }
  write_csv(out_dir + "/per_trial_metrics.csv",
            {"trial", "split", "train_split_warning", "metric", "value"}, rows);

  std::vector<std::vector<std::string>> summary;
  for (const auto& [metric, pool] : pools) {
    const auto& v = pool.second;
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    summary.push_back({metric, format_double(mean), format_double(se),
                       std::to_string(v.size())});
    std::cout << metric << ": mean " << format_double(mean) << " (se " << format_double(se)
              << ", n " << v.size() << ")\n";
  }
  write_csv(out_dir + "/summary.csv", {"metric", "mean", "se", "n"}, summary);

  if (!lat.aligned.empty()) {
    const char* names[3] = {"behavior", "shared", "neural"};
    std::vector<std::vector<std::string>> traj;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Matrix& truth = data.truth.latents.at(static_cast<std::size_t>(ids[i]));
      for (int row = 0; row < 3; ++row) {
        if (std::isnan(lat.aligned[i](row, 0))) continue;
        for (Index t = 0; t < data.t_bins; ++t)
          traj.push_back({std::to_string(ids[i]), std::to_string(t), names[row],
                          format_double(truth(row, t)),
                          format_double(lat.aligned[i](row, t))});
      }
    }
    write_csv(out_dir + "/aligned_latents.csv",
              {"trial", "time", "latent", "true_value", "aligned_estimate"}, traj);
  }

  const SubspaceVariance sv = subspace_variance(model, data, ids);
  std::vector<std::vector<std::string>> var_rows;
  const char* blocks[3] = {"behavior_only", "shared", "neural_only"};
  for (Index i = 0; i < sv.behavior.rows(); ++i)
    for (int blk = 0; blk < 3; ++blk) {
      if (!std::isnan(sv.behavior(i, blk)))
        var_rows.push_back({std::to_string(sv.trial_ids[static_cast<std::size_t>(i)]),
                            "behavior", blocks[blk], format_double(sv.behavior(i, blk))});
      if (!std::isnan(sv.neural(i, blk)))
        var_rows.push_back({std::to_string(sv.trial_ids[static_cast<std::size_t>(i)]),
                            "neural", blocks[blk], format_double(sv.neural(i, blk))});
    }
  write_csv(out_dir + "/subspace_variance.csv", {"trial", "modality", "block", "variance"},
            var_rows);
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed) {
  AppConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  if (seed) cfg.sim.seed = *seed;
  Dataset data = simulate(cfg.sim);
  data.sim_echo = sim_config_to_json(cfg.sim);
  write_dataset(out_path, data);
  std::cout << "wrote " << out_path << ": " << data.trials.size() << " trials, M="
            << data.m_dim << " N=" << data.n_dim << " T=" << data.t_bins << ", split ("
            << data.train_idx.size() << ", " << data.test_idx.size() << ")\n";
  return 0;
}

int run_train(const std::string& dataset_path, const std::string& config_path,
              const std::string& out_dir, const std::string& resume_path,
              std::optional<std::string> mode, std::optional<Index> epochs,
              std::optional<std::uint64_t> seed) {
  AppConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  if (mode) cfg.model.mode = mode_from_name(*mode);
  if (epochs) cfg.train.epochs = *epochs;
  if (seed) cfg.train.seed = *seed;

  const Dataset data = read_dataset(dataset_path);
  fs::create_directories(out_dir);
  DirLock lock(out_dir);

  TrainConfig tc = cfg.train;
  std::optional<TrainState> state;
  if (!resume_path.empty()) {
    LoadedCheckpoint loaded = read_checkpoint(resume_path);
    tc = loaded.train_cfg;
    if (epochs) tc.epochs = *epochs;
    state.emplace(std::move(loaded.state));
    std::cout << "resuming from epoch " << state->epoch << "\n";
  } else {
    cfg.model.t_bins = data.t_bins;
    state.emplace(init_train_state(data, cfg.model, tc));
  }

  const Index done_before = state->epoch;
  run_training(*state, data, tc, tc.epochs, [](const TraceRow& row) {
    std::cout << "epoch " << row.epoch << " elbo " << format_double(row.terms.total())
              << "\n";
  });

  nlohmann::json extra;
  extra["dataset"] = dataset_path;
  if (!state->model.cfg.has_behavior()) extra["ignored_modalities"] = {"behavior"};
  if (!state->model.cfg.has_neural()) extra["ignored_modalities"] = {"neural"};
  write_checkpoint(out_dir + "/checkpoint.mmgv", *state, tc, extra.dump());
  write_csv(out_dir + "/elbo_trace.csv", kTraceHeader, trace_rows(state->trace));
  std::cout << "trained epochs " << done_before << ".." << state->epoch << "; checkpoint at "
            << out_dir << "/checkpoint.mmgv\n";
  return 0;
}

int run_evaluate(const std::string& checkpoint_path, const std::string& dataset_path,
                 const std::string& out_dir, const std::string& split) {
  const Dataset data = read_dataset(dataset_path);
  LoadedCheckpoint loaded = read_checkpoint(checkpoint_path);
  const Model& model = loaded.state.model;
  if (model.cfg.t_bins != data.t_bins)
    throw ParameterError("evaluate: model time_bins (" + std::to_string(model.cfg.t_bins) +
                         ") != dataset tensor 'y_a' time dimension (" +
                         std::to_string(data.t_bins) + ")");
  if (model.cfg.has_behavior() && model.cfg.m_dim != data.m_dim)
    throw ParameterError("evaluate: model behavior dim != dataset tensor 'y_a' rows");
  if (model.cfg.has_neural() && model.cfg.n_dim != data.n_dim)
    throw ParameterError("evaluate: model neural dim != dataset tensor 'y_b' rows");

  fs::create_directories(out_dir);
  DirLock lock(out_dir);
  std::vector<Index> ids;
  bool warn = false;
  if (split == "test") {
    ids = data.test_idx;
  } else if (split == "train") {
    ids = data.train_idx;
    warn = true;
    std::cerr << "warning: evaluating on the training split\n";
  } else if (split == "all") {
    ids = data.train_idx;
    ids.insert(ids.end(), data.test_idx.begin(), data.test_idx.end());
    std::sort(ids.begin(), ids.end());
    warn = true;
  } else {
    throw ConfigError("evaluate: --split must be test, train, or all");
  }
  write_eval_csvs(out_dir, model, data, ids, split, warn);
  return 0;
}

int run_compare(const std::string& dataset_path, const std::string& config_path,
                const std::string& out_dir, std::optional<int> seeds,
                std::optional<Index> epochs, std::optional<std::uint64_t> base_seed) {
  AppConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  if (seeds) cfg.compare.n_seeds = *seeds;
  if (epochs) cfg.train.epochs = *epochs;
  if (base_seed) cfg.compare.base_seed = *base_seed;
  if (cfg.compare.modes.size() < 2) throw ConfigError("compare: need at least two modes");

  const Dataset data = read_dataset(dataset_path);
  fs::create_directories(out_dir);
  DirLock lock(out_dir);

  CompareSpec spec;
  spec.modes = cfg.compare.modes;
  spec.n_seeds = cfg.compare.n_seeds;
  spec.base_seed = cfg.compare.base_seed;
  spec.base_config = cfg.model;
  spec.base_config.t_bins = data.t_bins;
  spec.train_config = cfg.train;

  std::vector<std::vector<std::string>> manifest;
  CompareResult result;
  try {
    result = compare_models(
        data, spec,
        [&](const std::string& label, int seed, const TrainState& state,
            const LatentEval& lat, const ReconEval& recon) {
          (void)lat;
          (void)recon;
          const std::string tag = label + "_seed" + std::to_string(seed);
          write_csv(out_dir + "/trace_" + tag + ".csv", kTraceHeader,
                    trace_rows(state.trace));
          manifest.push_back({label, std::to_string(seed), "ok"});
          std::cout << "fitted " << tag << " (" << state.epoch << " epochs)\n";
        });
  } catch (const std::exception& e) {
    manifest.push_back({"<failed>", "-", e.what()});
    write_csv(out_dir + "/partial_results.csv", {"model", "seed", "status"}, manifest);
    throw;
  }

  std::vector<std::vector<std::string>> long_rows;
  for (const CompareMetricRow& r : result.rows)
    long_rows.push_back({r.model, std::to_string(r.seed), std::to_string(r.trial), r.metric,
                         format_double(r.value)});
  write_csv(out_dir + "/compare_long.csv", {"model", "seed", "trial", "metric", "value"},
            long_rows);

  std::map<std::pair<std::string, std::string>, std::pair<double, int>> agg;
  for (const CompareMetricRow& r : result.rows) {
    auto& slot = agg[{r.model, r.metric}];
    slot.first += r.value;
    slot.second += 1;
  }
  std::vector<std::vector<std::string>> comparison;
  for (const auto& [key, slot] : agg)
    comparison.push_back({key.first, key.second,
                          format_double(slot.first / slot.second),
                          std::to_string(slot.second)});
  write_csv(out_dir + "/comparison.csv", {"model", "metric", "mean", "n"}, comparison);

  std::vector<std::vector<std::string>> tests;
  for (const ComparePair& pair : result.tests) {
    tests.push_back({pair.metric, pair.model_x, pair.model_y, std::to_string(pair.x_better.n),
                     std::to_string(pair.x_better.wins), format_double(pair.x_better.p)});
    std::cout << pair.metric << ": " << pair.model_x << " vs " << pair.model_y << " wins "
              << pair.x_better.wins << "/" << pair.x_better.n << " p="
              << format_double(pair.x_better.p) << "\n";
  }
  write_csv(out_dir + "/sign_tests.csv",
            {"metric", "model_x", "model_y", "n", "wins_x", "p_x_better"}, tests);

  // per-trial scatter pairs for every tested model pair
  std::map<std::string, std::map<std::pair<int, Index>, double>> by_model_shared;
  for (const CompareMetricRow& r : result.rows)
    by_model_shared[r.metric + "|" + r.model][{r.seed, r.trial}] = r.value;
  std::vector<std::vector<std::string>> scatter;
  for (const ComparePair& pair : result.tests) {
    const auto& mx = by_model_shared[pair.metric + "|" + pair.model_x];
    const auto& my = by_model_shared[pair.metric + "|" + pair.model_y];
    for (const auto& [key, vx] : mx) {
      const auto it = my.find(key);
      if (it == my.end()) continue;
      scatter.push_back({pair.metric, pair.model_x, pair.model_y,
                         std::to_string(key.first), std::to_string(key.second),
                         format_double(vx), format_double(it->second)});
    }
  }
  write_csv(out_dir + "/scatter_pairs.csv",
            {"metric", "model_x", "model_y", "seed", "trial", "value_x", "value_y"}, scatter);
  return 0;
}

int run_gradcheck(const std::string& config_path, std::optional<std::uint64_t> seed) {
  AppConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  if (seed) cfg.train.seed = *seed;

  // tiny multimodal instance: <= 5 dims per tensor
  SimConfig sim;
  sim.trials = 2;
  sim.t_bins = 5;
  sim.image_side = 2;
  sim.neurons = 3;
  sim.seed = cfg.train.seed;
  const Dataset data = simulate(sim);

  ModelConfig mc = cfg.model;
  mc.mode = Mode::kMultimodal;
  mc.partition = {1, 1, 1};
  mc.t_bins = sim.t_bins;
  mc.f_bins = 4;
  mc.enc_a_widths = {4};
  mc.enc_b_widths = {4};
  mc.dec_widths = {4};
  mc.ell_init = 2.0;
  mc.m_dim = data.m_dim;
  mc.n_dim = data.n_dim;

  Model model = make_model(mc, compute_data_stats(data), cfg.train.seed);
  const auto refs = make_trial_refs(data, data.train_idx);
  const NoiseBatch noise = make_noise(model, data.train_idx, cfg.train.seed, 0, 1);
  const GradCheckReport report = grad_check(model, refs, noise);
  for (const GradCheckGroup& g : report.groups)
    std::cout << (g.pass ? "PASS " : "FAIL ") << g.name << " rel_err "
              << format_double(g.rel_err) << "\n";
  std::cout << (report.all_pass ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance "
            << format_double(report.tolerance) << ")\n";
  return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"Multi-modal Gaussian-process VAE: simulate, train, evaluate, compare"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_path, checkpoint_path, resume_path;
  std::string split = "test", mode_str;
  std::optional<std::uint64_t> seed;
  std::optional<Index> epochs;
  std::optional<int> seeds;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic paired dataset");
  sim->add_option("--config", config_path, "JSON config file");
  sim->add_option("--out", out_path, "output dataset path")->required();
  sim->add_option("--seed", seed, "override generator seed");

  auto* tr = app.add_subcommand("train", "fit a model to a dataset");
  tr->add_option("--dataset", dataset_path, "dataset container")->required();
  tr->add_option("--config", config_path, "JSON config file");
  tr->add_option("--out", out_path, "output directory")->required();
  tr->add_option("--mode", mode_str, "model mode override");
  tr->add_option("--epochs", epochs, "epoch count override");
  tr->add_option("--seed", seed, "training seed override");
  tr->add_option("--resume", resume_path, "checkpoint to continue from");

  auto* ev = app.add_subcommand("evaluate", "held-out metrics for a checkpoint");
  ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  ev->add_option("--dataset", dataset_path, "dataset container")->required();
  ev->add_option("--out", out_path, "output directory")->required();
  ev->add_option("--split", split, "test | train | all");

  auto* cp = app.add_subcommand("compare", "train and compare model variants");
  cp->add_option("--dataset", dataset_path, "dataset container")->required();
  cp->add_option("--config", config_path, "JSON config file");
  cp->add_option("--out", out_path, "output directory")->required();
  cp->add_option("--seeds", seeds, "seed ladder length");
  cp->add_option("--epochs", epochs, "epoch count override");
  cp->add_option("--seed", seed, "base seed override");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--config", config_path, "JSON config file");
  gc->add_option("--seed", seed, "instance seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return run_simulate(config_path, out_path, seed);
    if (tr->parsed())
      return run_train(dataset_path, config_path, out_path, resume_path,
                       mode_str.empty() ? std::nullopt : std::optional(mode_str), epochs,
                       seed);
    if (ev->parsed()) return run_evaluate(checkpoint_path, dataset_path, out_path, split);
    if (cp->parsed())
      return run_compare(dataset_path, config_path, out_path, seeds, epochs, seed);
    if (gc->parsed()) return run_gradcheck(config_path, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
