#pragma once

#include "mmgpvae/model.hpp"
#include "mmgpvae/simulation.hpp"
#include "mmgpvae/train.hpp"

#include <string>
#include <vector>

namespace mmgpvae {

struct CompareOptions {
  std::vector<Mode> modes{Mode::kMultimodal, Mode::kGpvaeOnly, Mode::kGpfaOnly};
  int n_seeds = 3;
  std::uint64_t base_seed = 0;
};

/// Everything a CLI run can configure, with documented defaults. Sections are
/// independent; a config file may carry any subset.
struct AppConfig {
  SimConfig sim;
  ModelConfig model;
  TrainConfig train;
  CompareOptions compare;
};

/// Parses a JSON config file. Unknown keys fail with the offending path;
/// malformed values name the field. Throws ConfigError.
AppConfig load_config_file(const std::string& path);
AppConfig parse_config_json(const std::string& text, const std::string& origin);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
std::string sim_config_to_json(const SimConfig& cfg);

}  // namespace mmgpvae
