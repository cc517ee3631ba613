#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/fourier_gp.hpp"
#include "mmgpvae/latent_model.hpp"
#include "mmgpvae/nnet.hpp"

namespace mmgpvae {

/// Amortized inference networks. Each present modality runs a per-timepoint
/// encoder; one pair of linear maps carries every latent row from T time
/// coefficients to F frequency coefficients. Shared-latent rows from the two
/// modalities are summed coefficientwise, means and pre-positivity variances
/// separately; the softplus is applied once after summation.
///
/// Row conventions: enc_a emits [behavior-only | shared] rows, enc_b emits
/// [shared | neural-only] rows; the posterior is ordered [A | S | B].
struct EncoderStack {
  const Mlp* enc_a = nullptr;  // null when the behavior modality is absent
  const Mlp* enc_b = nullptr;  // null when the neural modality is absent
  const LinearMap* l_mu = nullptr;
  const LinearMap* l_sigma = nullptr;
  double variance_floor = 1e-6;
};

/// Merges the per-modality mapped rows into the [A|S|B] posterior. Outputs
/// of absent modalities are passed as empty matrices. pre_out, when given,
/// receives the pre-softplus variance rows (needed for backprop).
VariationalPosterior combine_modality_rows(const Matrix& u_a_mu, const Matrix& u_a_sig,
                                           const Matrix& u_b_mu, const Matrix& u_b_sig,
                                           const LatentPartition& part, double variance_floor,
                                           Matrix* pre_out = nullptr);

/// Scatters posterior-space gradients back to the per-modality mapped rows
/// (the adjoint of combine_modality_rows' row bookkeeping, before softplus).
void split_modality_grads(const Matrix& grad_mu, const Matrix& grad_pre,
                          const LatentPartition& part, Matrix& g_u_a_mu, Matrix& g_u_a_sig,
                          Matrix& g_u_b_mu, Matrix& g_u_b_sig);

struct EncodeCache {
  MlpCache cache_a, cache_b;
  Matrix h_a, h_b;        // per-timepoint encoder outputs
  Matrix pre_sigma;       // P x F, before softplus
};

VariationalPosterior encode_trial(const Matrix& y_a, const Matrix& y_b,
                                  const EncoderStack& stack, const LatentPartition& part,
                                  EncodeCache* cache = nullptr);

/// Reparameterized draw: mu + sqrt(sigma2) .* noise.
Matrix sample_posterior(const VariationalPosterior& post, const Matrix& noise);

}  // namespace mmgpvae
