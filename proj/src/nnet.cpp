#include "mmgpvae/nnet.hpp"

namespace mmgpvae {

Mlp Mlp::make(Index in, const std::vector<Index>& hidden, Index out, Rng& rng) {
  Mlp net;
  Index prev = in;
  auto push = [&](Index rows) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(prev));
    net.weights.push_back(rng.normal_matrix(rows, prev) * scale);
    net.biases.push_back(Vector::Zero(rows));
    prev = rows;
  };
  for (Index h : hidden) push(h);
  push(out);
  return net;
}

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache) {
  if (input.rows() != net.in_dim()) throw ParameterError("mlp_forward: input dim mismatch");
  if (cache) {
    cache->input = input;
    cache->pre.clear();
    cache->pre.reserve(net.weights.size());
  }
  Matrix act = input;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix pre = (net.weights[l] * act).colwise() + net.biases[l];
    const bool last = (l + 1 == net.weights.size());
    if (cache) cache->pre.push_back(pre);
    if (last) {
      act = std::move(pre);
    } else {
      act = pre.unaryExpr([](double x) { return elu(x); });
    }
  }
  return act;
}

Matrix mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out,
                    Mlp& grad) {
  const std::size_t n_layers = net.weights.size();
  Matrix delta = grad_out;
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers)  // chain through the ELU that followed this layer
      delta.array() *= cache.pre[l].unaryExpr([](double x) { return elu_grad(x); }).array();
    const Matrix& below =
        (l == 0) ? cache.input
                 : static_cast<const Matrix&>(cache.pre[l - 1]);
    if (l == 0) {
      grad.weights[l].noalias() += delta * below.transpose();
    } else {
      grad.weights[l].noalias() +=
          delta * below.unaryExpr([](double x) { return elu(x); }).transpose();
    }
    grad.biases[l].noalias() += delta.rowwise().sum();
    delta = net.weights[l].transpose() * delta;
  }
  return delta;
}

}  // namespace mmgpvae
