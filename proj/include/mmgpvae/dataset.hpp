#pragma once

#include "mmgpvae/common.hpp"

#include <string>
#include <vector>

namespace mmgpvae {

/// One paired observation: behavior frames Y_A (M x T) and neural counts or
/// traces Y_B (N x T).
struct Trial {
  Matrix y_a;
  Matrix y_b;
};

/// Generator-side state stored losslessly next to the observations. Latent
/// rows are ordered [behavior-only, shared, neural-only].
struct GroundTruth {
  std::vector<Matrix> latents;       // per trial, P_true x T
  std::vector<Matrix> rates;         // per trial, N x T
  std::vector<Matrix> clean_images;  // per trial, M x T
  Vector w_s2;                       // generative neural loadings, shared latent
  Vector w_b;                        // generative neural loadings, neural latent
  Vector d;                          // generative log-rate offsets

  bool has_latents() const { return !latents.empty(); }
  bool has_rates() const { return !rates.empty(); }
  bool has_clean_images() const { return !clean_images.empty(); }
};

struct Dataset {
  Index m_dim = 0;
  Index n_dim = 0;
  Index t_bins = 0;
  Index p_true = 0;
  std::vector<Trial> trials;
  std::vector<Index> train_idx;
  std::vector<Index> test_idx;
  std::uint64_t seed = 0;
  std::string sim_echo;  // generator config as a JSON string; may be empty
  GroundTruth truth;
};

}  // namespace mmgpvae
