#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/rng.hpp"

#include <vector>

namespace mmgpvae {

/// Feed-forward network, ELU activations on hidden layers, linear output.
/// Columns of the input matrix are independent samples.
struct Mlp {
  std::vector<Matrix> weights;  // layer l: out_l x in_l
  std::vector<Vector> biases;

  Index in_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
  Index out_dim() const { return weights.empty() ? 0 : weights.back().rows(); }
  Index layer_count() const { return static_cast<Index>(weights.size()); }

  static Mlp make(Index in, const std::vector<Index>& hidden, Index out, Rng& rng);
};

/// Pre-activation cache of one forward pass, consumed by mlp_backward.
struct MlpCache {
  std::vector<Matrix> pre;  // pre-activation per layer (last one = output)
  Matrix input;
};

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache = nullptr);

/// Backpropagates grad_out; accumulates into grad (same shapes as net) and
/// returns the gradient with respect to the input.
Matrix mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out,
                    Mlp& grad);

/// Row-wise affine map: each row h of the input becomes W h + b. Used for the
/// per-latent time-to-frequency maps of the variational parameters.
struct LinearMap {
  Matrix weight;  // F x T
  Vector bias;    // F

  /// U = H W^T + 1 b^T, rows transformed independently.
  Matrix apply(const Matrix& rows_by_time) const {
    if (rows_by_time.cols() != weight.cols())
      throw ParameterError("LinearMap: input width differs from trained map");
    return (rows_by_time * weight.transpose()).rowwise() + bias.transpose();
  }

  /// Accumulates parameter gradients; returns gradient w.r.t. the input rows.
  Matrix backward(const Matrix& input_rows, const Matrix& grad_out, LinearMap& grad) const {
    grad.weight.noalias() += grad_out.transpose() * input_rows;
    grad.bias.noalias() += grad_out.colwise().sum().transpose();
    return grad_out * weight;
  }
};

}  // namespace mmgpvae
