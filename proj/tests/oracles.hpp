#pragma once

// Independent test oracles: deliberately written as plain scalar loops and
// dense linear algebra, sharing no code with the implementation paths they
// check.

#include "mmgpvae/common.hpp"
#include "mmgpvae/rng.hpp"

#include <cmath>
#include <vector>

namespace oracles {

using mmgpvae::Index;
using mmgpvae::Matrix;
using mmgpvae::Vector;

inline Matrix rbf_gram_loop(double rho, double ell, Index t_bins) {
  Matrix k(t_bins, t_bins);
  for (Index i = 0; i < t_bins; ++i)
    for (Index j = 0; j < t_bins; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      k(i, j) = rho * std::exp(-d * d / (2.0 * ell * ell));
    }
  return k;
}

// Periodized Gram matrix (full periodic summation); circulant and positive
// definite by construction.
inline Matrix periodized_gram_loop(double rho, double ell, Index t_bins) {
  const Index images = static_cast<Index>(std::ceil(12.0 * ell / t_bins)) + 2;
  Matrix k(t_bins, t_bins);
  for (Index i = 0; i < t_bins; ++i)
    for (Index j = 0; j < t_bins; ++j) {
      double acc = 0.0;
      for (Index m = -images; m <= images; ++m) {
        const double d = static_cast<double>(i - j + m * t_bins);
        acc += std::exp(-d * d / (2.0 * ell * ell));
      }
      k(i, j) = rho * acc;
    }
  return k;
}

// Dense multivariate normal log density with mean zero.
inline double mvn_logpdf_dense(const Vector& x, const Matrix& cov) {
  const Index n = x.size();
  const Eigen::LLT<Matrix> llt(cov);
  double logdet = 0.0;
  for (Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const Vector alpha = llt.solve(x);
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + logdet + x.dot(alpha));
}

// Naive synthesis: z[t] = sum_k ztilde[k] * basis_row_k[t], computed from the
// textbook row definitions rather than the stored basis.
inline Vector real_dft_synthesis_loop(const Vector& ztilde, Index t_bins) {
  const Index f_bins = ztilde.size();
  Vector z = Vector::Zero(t_bins);
  const double n = static_cast<double>(t_bins);
  for (Index t = 0; t < t_bins; ++t) {
    Index row = 0;
    double acc = ztilde[row] / std::sqrt(n);
    ++row;
    for (Index k = 1; row < f_bins; ++k) {
      const double w = 2.0 * M_PI * static_cast<double>(k) * static_cast<double>(t) / n;
      if (2 * k == t_bins) {
        acc += ztilde[row] * (t % 2 == 0 ? 1.0 : -1.0) / std::sqrt(n);
        ++row;
        break;
      }
      acc += ztilde[row] * std::sqrt(2.0 / n) * std::cos(w);
      ++row;
      if (row == f_bins) break;
      acc += ztilde[row] * std::sqrt(2.0 / n) * std::sin(w);
      ++row;
    }
    z[t] = acc;
  }
  return z;
}

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

// Streaming mean/standard-error estimator over `draws` evaluations.
template <typename F>
McEstimate mc_estimate(Index draws, F&& f) {
  double mean = 0.0, m2 = 0.0;
  for (Index i = 0; i < draws; ++i) {
    const double v = f();
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  McEstimate est;
  est.mean = mean;
  est.se = std::sqrt(m2 / static_cast<double>(draws - 1) / static_cast<double>(draws));
  return est;
}

// Poisson log likelihood in extended precision, one entry at a time.
inline long double poisson_loglik_longdouble(const Matrix& y, const Matrix& x) {
  long double total = 0.0L;
  for (Index j = 0; j < y.cols(); ++j)
    for (Index i = 0; i < y.rows(); ++i) {
      const long double xi = static_cast<long double>(x(i, j));
      const long double yi = static_cast<long double>(y(i, j));
      total += yi * xi - std::exp(xi) - std::lgamma(yi + 1.0L);
    }
  return total;
}

inline double gaussian_logpdf_scalar(double y, double mean, double var) {
  const double d = y - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
}

}  // namespace oracles
