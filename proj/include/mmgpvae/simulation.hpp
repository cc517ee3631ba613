#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/dataset.hpp"
#include "mmgpvae/fourier_gp.hpp"

#include <string>
#include <vector>

namespace mmgpvae {

/// Synthetic benchmark generator: three GP latents per trial drive a
/// rotating/scaling glyph (behavior modality) and Poisson spike counts
/// (neural modality). Latent rows: 0 = scale source (behavior-only),
/// 1 = angle source (shared), 2 = neural-only.
struct SimConfig {
  Index trials = 300;
  Index t_bins = 60;
  Index image_side = 28;
  Index neurons = 100;
  KernelParams kernel{1.0, 30.0, 1e-2};  // generative kernel, all three latents
  double angle_lo_deg = -90.0;
  double angle_hi_deg = 90.0;
  double scale_lo = 0.6;
  double scale_hi = 1.4;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::string template_path;  // empty: bundled glyph
  double loading_scale = 0.5;
  double base_log_rate = 1.0986122886681098;  // log 3

  void validate() const {
    if (trials < 1) throw ConfigError("simulate: trials must be >= 1");
    if (t_bins < 3) throw ConfigError("simulate: time_bins must be >= 3 (F >= 3 required)");
    if (image_side < 2) throw ConfigError("simulate: image_side must be >= 2");
    if (neurons < 1) throw ConfigError("simulate: neurons must be >= 1");
    if (!(angle_hi_deg > angle_lo_deg) || !(scale_hi > scale_lo) || !(scale_lo > 0.0))
      throw ConfigError("simulate: empty angle or scale range");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("simulate: train_fraction must be in (0, 1)");
    kernel.validate();
  }
};

/// Bundled glyph, or a user template: `side` lines of `side` whitespace
/// separated values in [0, 1].
Matrix load_template_glyph(const std::string& path, Index side);

/// Rotates by `angle_deg` and magnifies by `scale` about the frame center,
/// bilinear resampling, zero fill outside.
Matrix render_frame(const Matrix& glyph, double angle_deg, double scale);

/// Independent draws from N(0, K + alpha I) on the T-grid, one per latent,
/// via dense Cholesky. Returns one 3 x T matrix per trial.
std::vector<Matrix> sample_gp_trajectories(const SimConfig& cfg);

/// Frames for one trial, flattened column-major to side^2-vectors.
Matrix render_frames(const Vector& angles_deg, const Vector& scales, const Matrix& glyph);

/// Poisson counts at rate exp(w_s2 z_s + w_b z_b + d).
Matrix sample_spikes(const Vector& z_s, const Vector& z_b, const Vector& w_s2,
                     const Vector& w_b, const Vector& d, std::uint64_t seed);

Dataset simulate(const SimConfig& cfg);

}  // namespace mmgpvae
