#include "mmgpvae/latent_model.hpp"

namespace mmgpvae {

Matrix to_time_domain(const Matrix& ztilde, const FourierBasis& basis) {
  if (ztilde.cols() != basis.f_bins)
    throw ParameterError("to_time_domain: column count differs from basis F");
  return ztilde * basis.rows;
}

Matrix to_frequency_domain(const Matrix& z, const FourierBasis& basis) {
  if (z.cols() != basis.t_bins)
    throw ParameterError("to_frequency_domain: column count differs from basis T");
  return z * basis.rows.transpose();
}

std::pair<Matrix, Matrix> mix_latents(const Matrix& z, const LoadingsMatrix& loadings,
                                      const LatentPartition& part) {
  part.validate();
  if (z.rows() != part.total()) throw ParameterError("mix_latents: latent rows != partition");
  if (loadings.w_a.cols() != part.p_a || loadings.w_s1.cols() != part.p_s ||
      loadings.w_s2.cols() != part.p_s || loadings.w_b.cols() != part.p_b)
    throw ParameterError("mix_latents: loadings block widths != partition");

  const Index t_bins = z.cols();
  const auto z_a = z.topRows(part.p_a);
  const auto z_s = z.middleRows(part.p_a, part.p_s);
  const auto z_b = z.bottomRows(part.p_b);

  Matrix x_a = loadings.d_a.replicate(1, t_bins);
  if (part.p_a > 0) x_a.noalias() += loadings.w_a * z_a;
  if (part.p_s > 0) x_a.noalias() += loadings.w_s1 * z_s;

  Matrix x_b = loadings.d_b.replicate(1, t_bins);
  if (part.p_s > 0) x_b.noalias() += loadings.w_s2 * z_s;
  if (part.p_b > 0) x_b.noalias() += loadings.w_b * z_b;

  return {std::move(x_a), std::move(x_b)};
}

}  // namespace mmgpvae
