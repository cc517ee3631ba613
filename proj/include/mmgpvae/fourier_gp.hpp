#pragma once

#include "mmgpvae/common.hpp"

#include <span>
#include <vector>

namespace mmgpvae {

/// RBF kernel hyperparameters for one latent. rho and ell are optimized in
/// log space by the trainer; alpha stays fixed for the whole fit.
struct KernelParams {
  double rho = 1.0;    // marginal variance
  double ell = 30.0;   // length scale, in time bins
  double alpha = 1e-2; // diagonal jitter

  void validate() const {
    if (!(rho > 0.0)) throw ParameterError("KernelParams: rho must be > 0");
    if (!(ell > 0.0)) throw ParameterError("KernelParams: ell must be > 0");
    if (!(alpha >= 0.0)) throw ParameterError("KernelParams: alpha must be >= 0");
  }
};

/// Orthonormal real DFT rows for T bins, truncated to the F lowest frequencies.
/// Row 0 is the DC row; cosine/sine pairs follow in increasing frequency, with
/// a single alternating-sign row at Nyquist when T is even.
struct FourierBasis {
  Index t_bins = 0;
  Index f_bins = 0;
  Matrix rows;      // F x T, orthonormal rows
  IntVector freqs;  // integer frequency per row
};

/// Diagonal Fourier-domain prior variances: circulant eigenvalues of the
/// periodized kernel, clamped at zero, plus the jitter applied on use.
struct Spectrum {
  Vector s;
  double alpha = 0.0;
};

/// Mean-field Gaussian over the P x F latent Fourier coefficients.
struct VariationalPosterior {
  Matrix mu;      // P x F
  Matrix sigma2;  // P x F, elementwise variances
};

/// Gram matrix K[i,j] = rho * exp(-(i-j)^2 / (2 ell^2)) on the integer grid.
/// Jitter is not included.
Matrix build_rbf_gram(const KernelParams& params, Index t_bins);

FourierBasis build_fourier_basis(Index t_bins, Index f_bins);

/// Eigenvalues of the circulant embedding of the RBF kernel (real DFT of the
/// T-periodic symmetrized first kernel row) at the basis' retained
/// frequencies, duplicated across each cosine/sine pair.
Spectrum kernel_spectrum(const KernelParams& params, const FourierBasis& basis);

/// d s / d log(rho) and d s / d log(ell), rows matching basis rows.
void kernel_spectrum_grads(const KernelParams& params, const FourierBasis& basis,
                           Vector& ds_dlogrho, Vector& ds_dlogell);

/// Sum over latents and frequencies of log N(ztilde | 0, s + alpha).
double gp_prior_logdensity(const Matrix& ztilde, std::span<const Spectrum> spectra);

/// Closed-form E_q[log prior]:
///   -1/2 sum_{p,k} [ log(2 pi (s+alpha)) + (sigma2 + mu^2) / (s+alpha) ].
double gp_prior_expectation(const VariationalPosterior& post,
                            std::span<const Spectrum> spectra);

/// Accumulates d/d mu, d/d sigma2 and per-latent d/d s of gp_prior_expectation,
/// scaled by `weight`. grad_s has one row per latent.
void gp_prior_expectation_backward(const VariationalPosterior& post,
                                   std::span<const Spectrum> spectra, double weight,
                                   Matrix& grad_mu, Matrix& grad_sigma2, Matrix& grad_s);

/// 1/2 sum log(2 pi e sigma2).
double gaussian_entropy(const VariationalPosterior& post);

void gaussian_entropy_backward(const VariationalPosterior& post, double weight,
                               Matrix& grad_sigma2);

/// Smallest F whose retained spectral mass for an RBF kernel with length scale
/// ell_min reaches `mass`, clamped to [3, T].
Index prune_count(double ell_min, Index t_bins, double mass);

}  // namespace mmgpvae
