#include "mmgpvae/likelihoods.hpp"

#include <cmath>

namespace mmgpvae {

double behavior_loglik(const Matrix& y_a, const Matrix& x_a, const BehaviorDecoder& dec) {
  if (!(dec.sigma_y2 > 0.0)) throw NumericError("behavior_loglik: sigma_y2 must be > 0");
  const Matrix pred = mlp_forward(*dec.net, x_a);
  if (pred.rows() != y_a.rows() || pred.cols() != y_a.cols())
    throw ParameterError("behavior_loglik: decoder output shape != observations");
  const double sse = (y_a - pred).squaredNorm();
  const double mt = static_cast<double>(y_a.size());
  return -0.5 * mt * std::log(2.0 * M_PI * dec.sigma_y2) - 0.5 * sse / dec.sigma_y2;
}

double poisson_log_factorial(const Matrix& y_b) {
  double total = 0.0;
  for (Index j = 0; j < y_b.cols(); ++j)
    for (Index i = 0; i < y_b.rows(); ++i) {
      const double y = y_b(i, j);
      if (y < 0.0 || y != std::floor(y))
        throw ParameterError("poisson likelihood: counts must be nonnegative integers");
      total += std::lgamma(y + 1.0);
    }
  return total;
}

double poisson_loglik_sampled(const Matrix& y_b, const Matrix& x_b) {
  if (y_b.rows() != x_b.rows() || y_b.cols() != x_b.cols())
    throw ParameterError("poisson_loglik_sampled: shape mismatch");
  const double log_fact = poisson_log_factorial(y_b);
  double total = 0.0;
  for (Index j = 0; j < y_b.cols(); ++j)
    for (Index i = 0; i < y_b.rows(); ++i)
      total += y_b(i, j) * x_b(i, j) - std::exp(x_b(i, j));
  return total - log_fact;
}

NeuralEmbeddingMoments neural_embedding_moments(const VariationalPosterior& post,
                                                const LoadingsMatrix& loadings,
                                                const LatentPartition& part,
                                                const FourierBasis& basis) {
  part.validate();
  if (post.mu.rows() != part.total() || post.mu.cols() != basis.f_bins)
    throw ParameterError("neural_embedding_moments: posterior shape mismatch");
  if (post.sigma2.minCoeff() < 0.0)
    throw NumericError("neural_embedding_moments: negative posterior variance");

  const Index n_neural = loadings.d_b.size();
  const Index t_bins = basis.t_bins;
  Matrix w(n_neural, part.neural_rows());
  w << loadings.w_s2, loadings.w_b;

  const auto mu_sb = post.mu.bottomRows(part.neural_rows());
  const auto sig_sb = post.sigma2.bottomRows(part.neural_rows());

  NeuralEmbeddingMoments out;
  out.mean = loadings.d_b.replicate(1, t_bins);
  if (part.neural_rows() > 0) {
    out.mean.noalias() += w * (mu_sb * basis.rows);
    out.var.noalias() =
        w.cwiseAbs2() * (sig_sb * basis.rows.cwiseAbs2());
  } else {
    out.var = Matrix::Zero(n_neural, t_bins);
  }
  return out;
}

double poisson_expectation_closed_form(const Matrix& y_b, const VariationalPosterior& post,
                                       const LoadingsMatrix& loadings,
                                       const LatentPartition& part, const FourierBasis& basis,
                                       double exp_clamp) {
  const NeuralEmbeddingMoments mom = neural_embedding_moments(post, loadings, part, basis);
  if (y_b.rows() != mom.mean.rows() || y_b.cols() != mom.mean.cols())
    throw ParameterError("poisson_expectation_closed_form: observation shape mismatch");
  const double log_fact = poisson_log_factorial(y_b);
  double total = 0.0;
  for (Index j = 0; j < y_b.cols(); ++j)
    for (Index i = 0; i < y_b.rows(); ++i) {
      const double arg = mom.mean(i, j) + 0.5 * mom.var(i, j);
      total += y_b(i, j) * mom.mean(i, j) - std::exp(std::min(arg, exp_clamp));
    }
  return total - log_fact;
}

double gaussian_neural_loglik(const Matrix& y_b, const Matrix& x_b,
                              const NeuralLikelihoodConfig& cfg) {
  if (cfg.kind != NeuralKind::kGaussian)
    throw ParameterError("gaussian_neural_loglik: config kind is not gaussian");
  if (y_b.rows() != x_b.rows() || y_b.cols() != x_b.cols())
    throw ParameterError("gaussian_neural_loglik: shape mismatch");
  if (cfg.sigma_n2.size() != y_b.rows())
    throw ParameterError("gaussian_neural_loglik: variance count != neurons");
  if (cfg.sigma_n2.minCoeff() <= 0.0)
    throw NumericError("gaussian_neural_loglik: sigma_n2 must be > 0");
  const double t_bins = static_cast<double>(y_b.cols());
  double total = 0.0;
  for (Index i = 0; i < y_b.rows(); ++i) {
    const double sse = (y_b.row(i) - x_b.row(i)).squaredNorm();
    total += -0.5 * t_bins * std::log(2.0 * M_PI * cfg.sigma_n2[i]) -
             0.5 * sse / cfg.sigma_n2[i];
  }
  return total;
}

}  // namespace mmgpvae
