#include "mmgpvae/encoder.hpp"

namespace mmgpvae {

VariationalPosterior combine_modality_rows(const Matrix& u_a_mu, const Matrix& u_a_sig,
                                           const Matrix& u_b_mu, const Matrix& u_b_sig,
                                           const LatentPartition& part, double variance_floor,
                                           Matrix* pre_out) {
  part.validate();
  const bool has_a = u_a_mu.size() > 0;
  const bool has_b = u_b_mu.size() > 0;
  const Index f_bins = has_a ? u_a_mu.cols() : u_b_mu.cols();
  if (has_a && u_a_mu.rows() != part.behavior_rows())
    throw ParameterError("combine_modality_rows: behavior rows != p_a + p_s");
  if (has_b && u_b_mu.rows() != part.neural_rows())
    throw ParameterError("combine_modality_rows: neural rows != p_s + p_b");
  if (!has_a && !has_b) throw ParameterError("combine_modality_rows: no modality present");

  Matrix mu = Matrix::Zero(part.total(), f_bins);
  Matrix pre = Matrix::Zero(part.total(), f_bins);
  if (has_a) {
    mu.topRows(part.p_a) = u_a_mu.topRows(part.p_a);
    pre.topRows(part.p_a) = u_a_sig.topRows(part.p_a);
    mu.middleRows(part.p_a, part.p_s) += u_a_mu.bottomRows(part.p_s);
    pre.middleRows(part.p_a, part.p_s) += u_a_sig.bottomRows(part.p_s);
  }
  if (has_b) {
    mu.middleRows(part.p_a, part.p_s) += u_b_mu.topRows(part.p_s);
    pre.middleRows(part.p_a, part.p_s) += u_b_sig.topRows(part.p_s);
    mu.bottomRows(part.p_b) = u_b_mu.bottomRows(part.p_b);
    pre.bottomRows(part.p_b) = u_b_sig.bottomRows(part.p_b);
  }

  VariationalPosterior post;
  post.mu = std::move(mu);
  post.sigma2 = pre.unaryExpr([](double x) { return softplus(x); }).array() + variance_floor;
  if (pre_out) *pre_out = std::move(pre);
  return post;
}

void split_modality_grads(const Matrix& grad_mu, const Matrix& grad_pre,
                          const LatentPartition& part, Matrix& g_u_a_mu, Matrix& g_u_a_sig,
                          Matrix& g_u_b_mu, Matrix& g_u_b_sig) {
  if (g_u_a_mu.size() > 0) {
    g_u_a_mu.topRows(part.p_a) += grad_mu.topRows(part.p_a);
    g_u_a_sig.topRows(part.p_a) += grad_pre.topRows(part.p_a);
    g_u_a_mu.bottomRows(part.p_s) += grad_mu.middleRows(part.p_a, part.p_s);
    g_u_a_sig.bottomRows(part.p_s) += grad_pre.middleRows(part.p_a, part.p_s);
  }
  if (g_u_b_mu.size() > 0) {
    g_u_b_mu.topRows(part.p_s) += grad_mu.middleRows(part.p_a, part.p_s);
    g_u_b_sig.topRows(part.p_s) += grad_pre.middleRows(part.p_a, part.p_s);
    g_u_b_mu.bottomRows(part.p_b) += grad_mu.bottomRows(part.p_b);
    g_u_b_sig.bottomRows(part.p_b) += grad_pre.bottomRows(part.p_b);
  }
}

VariationalPosterior encode_trial(const Matrix& y_a, const Matrix& y_b,
                                  const EncoderStack& stack, const LatentPartition& part,
                                  EncodeCache* cache) {
  if (!stack.l_mu) {
    // time-domain posterior: the encoder stacks a mean head over a
    // pre-variance head, one column per time bin
    if (!stack.enc_a) throw ParameterError("encode_trial: no encoder present");
    const Matrix h = mlp_forward(*stack.enc_a, y_a, cache ? &cache->cache_a : nullptr);
    const Index p_total = part.total();
    if (h.rows() != 2 * p_total)
      throw ParameterError("encode_trial: two-head encoder rows != 2 * latents");
    VariationalPosterior post;
    post.mu = h.topRows(p_total);
    Matrix pre = h.bottomRows(p_total);
    post.sigma2 =
        pre.unaryExpr([](double x) { return softplus(x); }).array() + stack.variance_floor;
    if (cache) {
      cache->h_a = h;
      cache->pre_sigma = std::move(pre);
    }
    return post;
  }
  Matrix u_a_mu, u_a_sig, u_b_mu, u_b_sig;
  if (stack.enc_a) {
    const Matrix h_a = mlp_forward(*stack.enc_a, y_a, cache ? &cache->cache_a : nullptr);
    u_a_mu = stack.l_mu->apply(h_a);
    u_a_sig = stack.l_sigma->apply(h_a);
    if (cache) cache->h_a = h_a;
  }
  if (stack.enc_b) {
    const Matrix h_b = mlp_forward(*stack.enc_b, y_b, cache ? &cache->cache_b : nullptr);
    u_b_mu = stack.l_mu->apply(h_b);
    u_b_sig = stack.l_sigma->apply(h_b);
    if (cache) cache->h_b = h_b;
  }
  return combine_modality_rows(u_a_mu, u_a_sig, u_b_mu, u_b_sig, part, stack.variance_floor,
                               cache ? &cache->pre_sigma : nullptr);
}

Matrix sample_posterior(const VariationalPosterior& post, const Matrix& noise) {
  if (noise.rows() != post.mu.rows() || noise.cols() != post.mu.cols())
    throw ParameterError("sample_posterior: noise shape mismatch");
  return post.mu.array() + post.sigma2.array().sqrt() * noise.array();
}

}  // namespace mmgpvae
