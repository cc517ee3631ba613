#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/fourier_gp.hpp"

#include <utility>

namespace mmgpvae {

/// Latent row counts, ordered [behavior-only | shared | neural-only].
struct LatentPartition {
  Index p_a = 0;  // behavior-only latents
  Index p_s = 0;  // shared latents
  Index p_b = 0;  // neural-only latents

  Index total() const { return p_a + p_s + p_b; }
  Index behavior_rows() const { return p_a + p_s; }  // rows feeding x_A
  Index neural_rows() const { return p_s + p_b; }    // rows feeding x_B

  void validate() const {
    if (p_a < 0 || p_s < 0 || p_b < 0 || total() < 1)
      throw ParameterError("LatentPartition: counts must be >= 0 and sum >= 1");
  }
};

/// Block loadings. The zero blocks of the mixing matrix are structural: the
/// behavior embedding never reads neural-only latents and vice versa.
struct LoadingsMatrix {
  Matrix w_a;   // M_emb x p_a
  Matrix w_s1;  // M_emb x p_s
  Matrix w_s2;  // N x p_s
  Matrix w_b;   // N x p_b
  Vector d_a;   // M_emb
  Vector d_b;   // N
};

/// Per-row synthesis z_p = B^T ztilde_p, i.e. Z = Ztilde * B.
Matrix to_time_domain(const Matrix& ztilde, const FourierBasis& basis);

/// Per-row analysis Ztilde = Z * B^T. Exact inverse of to_time_domain only
/// when F = T.
Matrix to_frequency_domain(const Matrix& z, const FourierBasis& basis);

/// Applies the block loadings columnwise over time:
///   x_A = W_A z_A + W_S1 z_S + d_A,   x_B = W_S2 z_S + W_B z_B + d_B.
std::pair<Matrix, Matrix> mix_latents(const Matrix& z, const LoadingsMatrix& loadings,
                                      const LatentPartition& part);

}  // namespace mmgpvae
