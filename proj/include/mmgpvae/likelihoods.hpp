#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/fourier_gp.hpp"
#include "mmgpvae/latent_model.hpp"
#include "mmgpvae/nnet.hpp"

namespace mmgpvae {

/// Decoder network for the behavior modality plus its isotropic observation
/// variance. sigma_y2 is learned in log space; see model.hpp.
struct BehaviorDecoder {
  const Mlp* net = nullptr;
  double sigma_y2 = 1.0;
};

enum class NeuralKind { kPoisson, kGaussian };

struct NeuralLikelihoodConfig {
  NeuralKind kind = NeuralKind::kPoisson;
  Vector sigma_n2;  // per-neuron variance, used iff kind == kGaussian
};

/// sum_t log N(y_A[:,t] | g(x_A[:,t]), sigma_y2 I), full constants included.
double behavior_loglik(const Matrix& y_a, const Matrix& x_a, const BehaviorDecoder& dec);

/// sum_{i,t} [ y x - exp(x) - log y! ]. Counts must be nonnegative integers.
double poisson_loglik_sampled(const Matrix& y_b, const Matrix& x_b);

/// sum_{i,t} log y! via lgamma; the constant term of the Poisson likelihood.
double poisson_log_factorial(const Matrix& y_b);

/// Posterior mean and variance of the neural embedding under a mean-field
/// Fourier posterior:  m = W mu B + d,  v[i,t] = sum_{p,k} W[i,p]^2 B[k,t]^2
/// sigma2[p,k], with W spanning the shared+neural blocks.
struct NeuralEmbeddingMoments {
  Matrix mean;  // N x T
  Matrix var;   // N x T
};

NeuralEmbeddingMoments neural_embedding_moments(const VariationalPosterior& post,
                                                const LoadingsMatrix& loadings,
                                                const LatentPartition& part,
                                                const FourierBasis& basis);

/// Closed-form E_q[log Poisson]:
///   sum_{i,t} [ y m - exp(m + v/2) ] - sum log y!.
/// exp arguments above `exp_clamp` are clamped; pass infinity to disable.
double poisson_expectation_closed_form(const Matrix& y_b, const VariationalPosterior& post,
                                       const LoadingsMatrix& loadings,
                                       const LatentPartition& part, const FourierBasis& basis,
                                       double exp_clamp = std::numeric_limits<double>::infinity());

/// sum_{i,t} log N(y | x, sigma_n2[i]) with per-neuron variance.
double gaussian_neural_loglik(const Matrix& y_b, const Matrix& x_b,
                              const NeuralLikelihoodConfig& cfg);

}  // namespace mmgpvae
