#include "mmgpvae/fourier_gp.hpp"

#include <algorithm>
#include <cmath>

namespace mmgpvae {

namespace {

// How many +-jT images keep the Gaussian tail below double roundoff.
Index periodization_terms(double ell, Index t_bins) {
  return static_cast<Index>(std::ceil(10.0 * ell / static_cast<double>(t_bins))) + 1;
}

// First row of the circulant embedding: the T-periodic summation of the
// kernel, r[t] = rho * sum_j exp(-(t + jT)^2 / (2 ell^2)). Unlike the plain
// wrapped row this is positive definite on the ring for every (rho, ell).
Vector periodized_kernel_row(const KernelParams& params, Index t_bins) {
  const Index j_max = periodization_terms(params.ell, t_bins);
  const double inv = 1.0 / (2.0 * params.ell * params.ell);
  Vector r(t_bins);
  for (Index t = 0; t < t_bins; ++t) {
    double acc = 0.0;
    for (Index j = -j_max; j <= j_max; ++j) {
      const double d = static_cast<double>(t + j * t_bins);
      acc += std::exp(-d * d * inv);
    }
    r[t] = params.rho * acc;
  }
  return r;
}

// Circulant eigenvalue at integer frequency f for a symmetric first row.
double circulant_eigenvalue(const Vector& row, Index freq) {
  const Index t_bins = row.size();
  const double w = 2.0 * M_PI * static_cast<double>(freq) / static_cast<double>(t_bins);
  double acc = 0.0;
  for (Index t = 0; t < t_bins; ++t) acc += row[t] * std::cos(w * static_cast<double>(t));
  return acc;
}

}  // namespace

Matrix build_rbf_gram(const KernelParams& params, Index t_bins) {
  params.validate();
  if (t_bins < 1) throw ParameterError("build_rbf_gram: T must be >= 1");
  Matrix gram(t_bins, t_bins);
  const double inv = 1.0 / (2.0 * params.ell * params.ell);
  for (Index i = 0; i < t_bins; ++i) {
    gram(i, i) = params.rho;
    for (Index j = 0; j < i; ++j) {
      const double d = static_cast<double>(i - j);
      gram(i, j) = params.rho * std::exp(-d * d * inv);
      gram(j, i) = gram(i, j);
    }
  }
  return gram;
}

FourierBasis build_fourier_basis(Index t_bins, Index f_bins) {
  if (t_bins < 1) throw ParameterError("build_fourier_basis: T must be >= 1");
  if (f_bins < 1 || f_bins > t_bins)
    throw ParameterError("build_fourier_basis: need 1 <= F <= T");

  FourierBasis basis;
  basis.t_bins = t_bins;
  basis.f_bins = f_bins;
  basis.rows.resize(f_bins, t_bins);
  basis.freqs.resize(f_bins);

  const double n = static_cast<double>(t_bins);
  Index row = 0;
  basis.rows.row(row).setConstant(1.0 / std::sqrt(n));
  basis.freqs[row++] = 0;

  const double amp = std::sqrt(2.0 / n);
  for (Index k = 1; row < f_bins; ++k) {
    if (2 * k == t_bins) {  // Nyquist: single alternating row
      for (Index t = 0; t < t_bins; ++t)
        basis.rows(row, t) = (t % 2 == 0 ? 1.0 : -1.0) / std::sqrt(n);
      basis.freqs[row++] = static_cast<int>(k);
      break;
    }
    const double w = 2.0 * M_PI * static_cast<double>(k) / n;
    for (Index t = 0; t < t_bins; ++t)
      basis.rows(row, t) = amp * std::cos(w * static_cast<double>(t));
    basis.freqs[row++] = static_cast<int>(k);
    if (row == f_bins) break;
    for (Index t = 0; t < t_bins; ++t)
      basis.rows(row, t) = amp * std::sin(w * static_cast<double>(t));
    basis.freqs[row++] = static_cast<int>(k);
  }
  return basis;
}

Spectrum kernel_spectrum(const KernelParams& params, const FourierBasis& basis) {
  params.validate();
  const Vector row = periodized_kernel_row(params, basis.t_bins);
  Spectrum spec;
  spec.alpha = params.alpha;
  spec.s.resize(basis.f_bins);
  for (Index k = 0; k < basis.f_bins; ++k)
    spec.s[k] = std::max(circulant_eigenvalue(row, basis.freqs[k]), 0.0);
  return spec;
}

void kernel_spectrum_grads(const KernelParams& params, const FourierBasis& basis,
                           Vector& ds_dlogrho, Vector& ds_dlogell) {
  params.validate();
  const Index t_bins = basis.t_bins;
  const Vector row = periodized_kernel_row(params, t_bins);
  // d row / d log(ell), summed over the same periodic images
  const Index j_max = periodization_terms(params.ell, t_bins);
  const double inv = 1.0 / (2.0 * params.ell * params.ell);
  Vector drow(t_bins);
  for (Index t = 0; t < t_bins; ++t) {
    double acc = 0.0;
    for (Index j = -j_max; j <= j_max; ++j) {
      const double d = static_cast<double>(t + j * t_bins);
      acc += std::exp(-d * d * inv) * d * d;
    }
    drow[t] = params.rho * acc / (params.ell * params.ell);
  }
  ds_dlogrho.resize(basis.f_bins);
  ds_dlogell.resize(basis.f_bins);
  for (Index k = 0; k < basis.f_bins; ++k) {
    const double lam = circulant_eigenvalue(row, basis.freqs[k]);
    if (lam <= 0.0) {  // clamped entries are flat
      ds_dlogrho[k] = 0.0;
      ds_dlogell[k] = 0.0;
      continue;
    }
    ds_dlogrho[k] = lam;
    ds_dlogell[k] = circulant_eigenvalue(drow, basis.freqs[k]);
  }
}

double gp_prior_logdensity(const Matrix& ztilde, std::span<const Spectrum> spectra) {
  if (static_cast<std::size_t>(ztilde.rows()) != spectra.size())
    throw ParameterError("gp_prior_logdensity: latent count mismatch");
  const double log2pi = std::log(2.0 * M_PI);
  double total = 0.0;
  for (Index p = 0; p < ztilde.rows(); ++p) {
    const Spectrum& spec = spectra[static_cast<std::size_t>(p)];
    if (spec.s.size() != ztilde.cols())
      throw ParameterError("gp_prior_logdensity: frequency count mismatch");
    for (Index k = 0; k < ztilde.cols(); ++k) {
      const double var = spec.s[k] + spec.alpha;
      if (!(var > 0.0)) throw NumericError("gp_prior_logdensity: nonpositive prior variance");
      total += -0.5 * (log2pi + std::log(var) + ztilde(p, k) * ztilde(p, k) / var);
    }
  }
  return total;
}

double gp_prior_expectation(const VariationalPosterior& post,
                            std::span<const Spectrum> spectra) {
  if (static_cast<std::size_t>(post.mu.rows()) != spectra.size() ||
      post.sigma2.rows() != post.mu.rows() || post.sigma2.cols() != post.mu.cols())
    throw ParameterError("gp_prior_expectation: shape mismatch");
  const double log2pi = std::log(2.0 * M_PI);
  double total = 0.0;
  for (Index p = 0; p < post.mu.rows(); ++p) {
    const Spectrum& spec = spectra[static_cast<std::size_t>(p)];
    if (spec.s.size() != post.mu.cols())
      throw ParameterError("gp_prior_expectation: frequency count mismatch");
    for (Index k = 0; k < post.mu.cols(); ++k) {
      const double var = spec.s[k] + spec.alpha;
      if (!(var > 0.0)) throw NumericError("gp_prior_expectation: nonpositive prior variance");
      const double sig2 = post.sigma2(p, k);
      if (sig2 < 0.0) throw NumericError("gp_prior_expectation: negative posterior variance");
      const double mu = post.mu(p, k);
      total += -0.5 * (log2pi + std::log(var) + (sig2 + mu * mu) / var);
    }
  }
  return total;
}

void gp_prior_expectation_backward(const VariationalPosterior& post,
                                   std::span<const Spectrum> spectra, double weight,
                                   Matrix& grad_mu, Matrix& grad_sigma2, Matrix& grad_s) {
  for (Index p = 0; p < post.mu.rows(); ++p) {
    const Spectrum& spec = spectra[static_cast<std::size_t>(p)];
    for (Index k = 0; k < post.mu.cols(); ++k) {
      const double var = spec.s[k] + spec.alpha;
      const double mu = post.mu(p, k);
      const double sig2 = post.sigma2(p, k);
      grad_mu(p, k) += weight * (-mu / var);
      grad_sigma2(p, k) += weight * (-0.5 / var);
      grad_s(p, k) += weight * (-0.5 * (1.0 / var - (sig2 + mu * mu) / (var * var)));
    }
  }
}

double gaussian_entropy(const VariationalPosterior& post) {
  const double c = std::log(2.0 * M_PI) + 1.0;
  double total = 0.0;
  for (Index p = 0; p < post.sigma2.rows(); ++p)
    for (Index k = 0; k < post.sigma2.cols(); ++k) {
      const double sig2 = post.sigma2(p, k);
      if (!(sig2 > 0.0)) throw NumericError("gaussian_entropy: nonpositive variance");
      total += 0.5 * (c + std::log(sig2));
    }
  return total;
}

void gaussian_entropy_backward(const VariationalPosterior& post, double weight,
                               Matrix& grad_sigma2) {
  grad_sigma2.array() += weight * 0.5 / post.sigma2.array();
}

Index prune_count(double ell_min, Index t_bins, double mass) {
  if (!(ell_min > 0.0)) throw ParameterError("prune_count: ell_min must be > 0");
  if (!(mass > 0.0 && mass <= 1.0)) throw ParameterError("prune_count: mass must be in (0, 1]");
  KernelParams params{1.0, ell_min, 0.0};
  const FourierBasis basis = build_fourier_basis(t_bins, t_bins);
  const Spectrum spec = kernel_spectrum(params, basis);
  const double total = spec.s.sum();
  double running = 0.0;
  Index f = t_bins;
  for (Index k = 0; k < t_bins; ++k) {
    running += spec.s[k];
    if (running >= mass * total) {
      f = k + 1;
      break;
    }
  }
  return std::clamp<Index>(f, std::min<Index>(3, t_bins), t_bins);
}

}  // namespace mmgpvae
