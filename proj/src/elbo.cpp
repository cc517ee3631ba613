#include "mmgpvae/elbo.hpp"

#include <cmath>

namespace mmgpvae {

namespace {

// Dense time-domain GP prior pieces, shared by every trial of a batch.
struct DensePrior {
  std::vector<Matrix> cinv;
  std::vector<Vector> cinv_diag;
  std::vector<double> logdet;
  // kernel-gradient machinery (filled only when grads are requested)
  std::vector<Matrix> dk_rho, dk_ell;    // dC/dlog(rho), dC/dlog(ell)
  std::vector<double> tr_rho, tr_ell;    // tr(C^-1 dC)
  std::vector<Vector> qdiag_rho, qdiag_ell;  // diag(C^-1 dC C^-1)
};

DensePrior make_dense_prior(const Model& model, bool with_grads) {
  const Index p_total = model.cfg.partition.total();
  const Index t_bins = model.cfg.t_bins;
  DensePrior dp;
  for (Index p = 0; p < p_total; ++p) {
    KernelParams kp{std::exp(model.log_rho[p]), std::exp(model.log_ell[p]), model.cfg.alpha};
    const Matrix gram = build_rbf_gram(kp, t_bins);
    Matrix cov = gram;
    cov.diagonal().array() += model.cfg.alpha;
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericError("time-domain prior: covariance not positive definite");
    Matrix cinv = llt.solve(Matrix::Identity(t_bins, t_bins));
    double logdet = 0.0;
    for (Index i = 0; i < t_bins; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    dp.cinv_diag.push_back(cinv.diagonal());
    dp.logdet.push_back(logdet);
    if (with_grads) {
      Matrix dist2(t_bins, t_bins);
      for (Index i = 0; i < t_bins; ++i)
        for (Index j = 0; j < t_bins; ++j) {
          const double d = static_cast<double>(i - j);
          dist2(i, j) = d * d;
        }
      const Matrix dk_rho = gram;  // dC/dlog(rho)
      const Matrix dk_ell = gram.cwiseProduct(dist2) / (kp.ell * kp.ell);
      dp.tr_rho.push_back((cinv.cwiseProduct(dk_rho)).sum());
      dp.tr_ell.push_back((cinv.cwiseProduct(dk_ell)).sum());
      dp.qdiag_rho.push_back((cinv * dk_rho * cinv).diagonal());
      dp.qdiag_ell.push_back((cinv * dk_ell * cinv).diagonal());
      dp.dk_rho.push_back(dk_rho);
      dp.dk_ell.push_back(dk_ell);
    }
    dp.cinv.push_back(std::move(cinv));
  }
  return dp;
}

struct TrialWork {
  VariationalPosterior post;
  Matrix pre_sigma;                 // P x F, before softplus
  std::vector<Matrix> ztilde;       // per sample
  std::vector<Matrix> z;            // per sample, time domain
  Matrix pois_exp;                  // exp(min(m + v/2, clamp))
  Matrix pois_mask;                 // 1 where the clamp was inactive
  Matrix g_mu, g_sigma2;            // gradient accumulators
};

}  // namespace

std::vector<TrialRef> make_trial_refs(const Dataset& data, std::span<const Index> ids) {
  std::vector<TrialRef> refs;
  refs.reserve(ids.size());
  for (Index id : ids) {
    const Trial& tr = data.trials.at(static_cast<std::size_t>(id));
    refs.push_back({&tr.y_a, &tr.y_b});
  }
  return refs;
}

ElboTerms elbo_batch(const Model& model, std::span<const TrialRef> trials,
                     const NoiseBatch& noise, Model* grads,
                     std::vector<ElboTerms>* per_trial) {
  const ModelConfig& cfg = model.cfg;
  const LatentPartition& part = cfg.partition;
  const Index n_trials = static_cast<Index>(trials.size());
  if (n_trials == 0) throw ParameterError("elbo_batch: empty batch");
  const Index t_bins = cfg.t_bins;
  const Index p_total = part.total();
  const Index f_eff = cfg.fourier() ? model.basis.f_bins : t_bins;
  const bool fourier = cfg.fourier();
  const bool sampled = cfg.has_behavior() ||
                       (cfg.has_neural() && cfg.neural_kind == NeuralKind::kGaussian);

  Index n_samples = 0;
  if (sampled) {
    if (static_cast<Index>(noise.size()) != n_trials)
      throw ParameterError("elbo_batch: noise count != trial count");
    n_samples = static_cast<Index>(noise.front().size());
    if (n_samples < 1) throw ParameterError("elbo_batch: need >= 1 sample per trial");
  }

  std::vector<Spectrum> spectra;
  if (fourier) spectra = model.spectra();
  DensePrior dense_prior;
  if (cfg.mode == Mode::kTimedomainGpvae)
    dense_prior = make_dense_prior(model, grads != nullptr);

  // ---- encoder forward, batched over trials ----
  MlpCache cache_a, cache_b;
  Matrix h_a_all, h_b_all;
  if (cfg.has_behavior()) {
    Matrix y_a_all(cfg.m_dim, t_bins * n_trials);
    for (Index i = 0; i < n_trials; ++i) {
      const Matrix& y = *trials[static_cast<std::size_t>(i)].y_a;
      if (y.rows() != cfg.m_dim || y.cols() != t_bins)
        throw ParameterError("elbo_batch: behavior observation shape mismatch");
      y_a_all.middleCols(i * t_bins, t_bins) = y;
    }
    h_a_all = mlp_forward(model.enc_a, y_a_all, grads ? &cache_a : nullptr);
  }
  if (cfg.has_neural()) {
    Matrix y_b_all(cfg.n_dim, t_bins * n_trials);
    for (Index i = 0; i < n_trials; ++i) {
      const Matrix& y = *trials[static_cast<std::size_t>(i)].y_b;
      if (y.rows() != cfg.n_dim || y.cols() != t_bins)
        throw ParameterError("elbo_batch: neural observation shape mismatch");
      y_b_all.middleCols(i * t_bins, t_bins) = y;
    }
    h_b_all = mlp_forward(model.enc_b, y_b_all, grads ? &cache_b : nullptr);
  }

  std::vector<TrialWork> work(static_cast<std::size_t>(n_trials));
  std::vector<ElboTerms> terms(static_cast<std::size_t>(n_trials));

  const double sigma_y2 = cfg.has_behavior() ? model.sigma_y2() : 1.0;
  Vector sigma_n2;
  if (cfg.has_neural() && cfg.neural_kind == NeuralKind::kGaussian)
    sigma_n2 = model.log_sigma_n2.array().exp();

  Matrix w_neural;  // [W_S2 | W_B], built once
  if (cfg.has_neural()) {
    w_neural.resize(cfg.n_dim, part.neural_rows());
    w_neural << model.loadings.w_s2, model.loadings.w_b;
  }
  Matrix basis_sq;
  if (fourier && cfg.has_neural() && cfg.neural_kind == NeuralKind::kPoisson)
    basis_sq = model.basis.rows.cwiseAbs2();

  // ---- per-trial posterior + closed-form terms ----
  for (Index i = 0; i < n_trials; ++i) {
    TrialWork& tw = work[static_cast<std::size_t>(i)];
    if (fourier) {
      Matrix u_a_mu, u_a_sig, u_b_mu, u_b_sig;
      if (cfg.has_behavior()) {
        const Matrix h = h_a_all.middleCols(i * t_bins, t_bins);
        u_a_mu = model.l_mu.apply(h);
        u_a_sig = model.l_sigma.apply(h);
      }
      if (cfg.has_neural()) {
        const Matrix h = h_b_all.middleCols(i * t_bins, t_bins);
        u_b_mu = model.l_mu.apply(h);
        u_b_sig = model.l_sigma.apply(h);
      }
      tw.post = combine_modality_rows(u_a_mu, u_a_sig, u_b_mu, u_b_sig, part,
                                      cfg.variance_floor, &tw.pre_sigma);
    } else {
      const Matrix h = h_a_all.middleCols(i * t_bins, t_bins);
      tw.post.mu = h.topRows(p_total);
      tw.pre_sigma = h.bottomRows(p_total);
      tw.post.sigma2 =
          tw.pre_sigma.unaryExpr([](double x) { return softplus(x); }).array() +
          cfg.variance_floor;
    }

    ElboTerms& tt = terms[static_cast<std::size_t>(i)];
    tt.entropy = gaussian_entropy(tw.post);

    if (fourier) {
      tt.prior = gp_prior_expectation(tw.post, spectra);
    } else if (cfg.mode == Mode::kTimedomainGpvae) {
      double acc = 0.0;
      for (Index p = 0; p < p_total; ++p) {
        const auto mu = tw.post.mu.row(p).transpose();
        const auto sig = tw.post.sigma2.row(p).transpose();
        acc += -0.5 * (static_cast<double>(t_bins) * std::log(2.0 * M_PI) +
                       dense_prior.logdet[static_cast<std::size_t>(p)] +
                       mu.dot(dense_prior.cinv[static_cast<std::size_t>(p)] * mu) +
                       sig.dot(dense_prior.cinv_diag[static_cast<std::size_t>(p)]));
      }
      tt.prior = acc;
    } else {  // plain VAE: standard-normal prior per coefficient
      tt.prior = -0.5 * (std::log(2.0 * M_PI) * static_cast<double>(tw.post.mu.size()) +
                         tw.post.sigma2.sum() + tw.post.mu.squaredNorm());
    }

    if (cfg.has_neural() && cfg.neural_kind == NeuralKind::kPoisson) {
      const Matrix& y = *trials[static_cast<std::size_t>(i)].y_b;
      const auto mu_sb = tw.post.mu.bottomRows(part.neural_rows());
      const auto sig_sb = tw.post.sigma2.bottomRows(part.neural_rows());
      Matrix m = model.loadings.d_b.replicate(1, t_bins);
      m.noalias() += w_neural * (mu_sb * model.basis.rows);
      Matrix arg = m;
      arg.noalias() += 0.5 * (w_neural.cwiseAbs2() * (sig_sb * basis_sq));
      tw.pois_mask = (arg.array() < cfg.exp_clamp).cast<double>();
      tw.pois_exp = arg.cwiseMin(cfg.exp_clamp).array().exp();
      tt.neural = (y.cwiseProduct(m)).sum() - tw.pois_exp.sum() - poisson_log_factorial(y);
    }

    if (grads) {
      tw.g_mu = Matrix::Zero(p_total, f_eff);
      tw.g_sigma2 = Matrix::Zero(p_total, f_eff);
    }
  }

  // ---- sampled paths: behavior likelihood, Gaussian neural likelihood ----
  Matrix x_a_all;  // decoder inputs for every (trial, sample) column block
  MlpCache cache_dec;
  Matrix preds;
  const double inv_s = n_samples > 0 ? 1.0 / static_cast<double>(n_samples) : 0.0;
  if (sampled) {
    for (Index i = 0; i < n_trials; ++i) {
      TrialWork& tw = work[static_cast<std::size_t>(i)];
      const auto& trial_noise = noise[static_cast<std::size_t>(i)];
      if (static_cast<Index>(trial_noise.size()) != n_samples)
        throw ParameterError("elbo_batch: ragged noise");
      tw.ztilde.reserve(static_cast<std::size_t>(n_samples));
      tw.z.reserve(static_cast<std::size_t>(n_samples));
      for (Index s = 0; s < n_samples; ++s) {
        Matrix zt = sample_posterior(tw.post, trial_noise[static_cast<std::size_t>(s)]);
        tw.z.push_back(fourier ? Matrix(zt * model.basis.rows) : zt);
        tw.ztilde.push_back(std::move(zt));
      }
    }

    if (cfg.has_behavior()) {
      const Index m_emb = cfg.effective_embed_dim();
      x_a_all.resize(m_emb, t_bins * n_trials * n_samples);
      for (Index i = 0; i < n_trials; ++i) {
        TrialWork& tw = work[static_cast<std::size_t>(i)];
        for (Index s = 0; s < n_samples; ++s) {
          const Matrix& z = tw.z[static_cast<std::size_t>(s)];
          Matrix x = model.loadings.d_a.replicate(1, t_bins);
          if (part.p_a > 0) x.noalias() += model.loadings.w_a * z.topRows(part.p_a);
          if (part.p_s > 0)
            x.noalias() += model.loadings.w_s1 * z.middleRows(part.p_a, part.p_s);
          x_a_all.middleCols((i * n_samples + s) * t_bins, t_bins) = x;
        }
      }
      preds = mlp_forward(model.decoder, x_a_all, grads ? &cache_dec : nullptr);
      const double mt = static_cast<double>(cfg.m_dim * t_bins);
      const double log_norm = -0.5 * mt * std::log(2.0 * M_PI * sigma_y2);
      for (Index i = 0; i < n_trials; ++i) {
        const Matrix& y = *trials[static_cast<std::size_t>(i)].y_a;
        double acc = 0.0;
        for (Index s = 0; s < n_samples; ++s) {
          const double sse =
              (y - preds.middleCols((i * n_samples + s) * t_bins, t_bins)).squaredNorm();
          acc += log_norm - 0.5 * sse / sigma_y2;
        }
        terms[static_cast<std::size_t>(i)].behavior = acc * inv_s;
      }
    }

    if (cfg.has_neural() && cfg.neural_kind == NeuralKind::kGaussian) {
      NeuralLikelihoodConfig nc;
      nc.kind = NeuralKind::kGaussian;
      nc.sigma_n2 = sigma_n2;
      for (Index i = 0; i < n_trials; ++i) {
        TrialWork& tw = work[static_cast<std::size_t>(i)];
        const Matrix& y = *trials[static_cast<std::size_t>(i)].y_b;
        double acc = 0.0;
        for (Index s = 0; s < n_samples; ++s) {
          const Matrix& z = tw.z[static_cast<std::size_t>(s)];
          Matrix x = model.loadings.d_b.replicate(1, t_bins);
          if (part.p_s > 0)
            x.noalias() += model.loadings.w_s2 * z.middleRows(part.p_a, part.p_s);
          if (part.p_b > 0) x.noalias() += model.loadings.w_b * z.bottomRows(part.p_b);
          acc += gaussian_neural_loglik(y, x, nc);
        }
        terms[static_cast<std::size_t>(i)].neural = acc * inv_s;
      }
    }
  }

  ElboTerms total;
  for (Index i = 0; i < n_trials; ++i) total += terms[static_cast<std::size_t>(i)];
  if (per_trial) *per_trial = terms;
  if (!grads) return total;

  // ================= backward =================
  Matrix grad_s_total;  // accumulated d/d s for the Fourier prior, P x F
  if (fourier) grad_s_total = Matrix::Zero(p_total, f_eff);

  for (Index i = 0; i < n_trials; ++i) {
    TrialWork& tw = work[static_cast<std::size_t>(i)];
    gaussian_entropy_backward(tw.post, 1.0, tw.g_sigma2);

    if (fourier) {
      gp_prior_expectation_backward(tw.post, spectra, 1.0, tw.g_mu, tw.g_sigma2,
                                    grad_s_total);
    } else if (cfg.mode == Mode::kTimedomainGpvae) {
      for (Index p = 0; p < p_total; ++p) {
        const std::size_t ps = static_cast<std::size_t>(p);
        const Vector mu = tw.post.mu.row(p).transpose();
        const Vector sig = tw.post.sigma2.row(p).transpose();
        const Vector u = dense_prior.cinv[ps] * mu;
        tw.g_mu.row(p) -= u.transpose();
        tw.g_sigma2.row(p) -= 0.5 * dense_prior.cinv_diag[ps].transpose();
        grads->log_rho[p] +=
            -0.5 * (dense_prior.tr_rho[ps] - u.dot(dense_prior.dk_rho[ps] * u) -
                    sig.dot(dense_prior.qdiag_rho[ps]));
        grads->log_ell[p] +=
            -0.5 * (dense_prior.tr_ell[ps] - u.dot(dense_prior.dk_ell[ps] * u) -
                    sig.dot(dense_prior.qdiag_ell[ps]));
      }
    } else {
      tw.g_mu -= tw.post.mu;
      tw.g_sigma2.array() -= 0.5;
    }

    if (cfg.has_neural() && cfg.neural_kind == NeuralKind::kPoisson) {
      const Matrix& y = *trials[static_cast<std::size_t>(i)].y_b;
      const auto mu_sb = tw.post.mu.bottomRows(part.neural_rows());
      const auto sig_sb = tw.post.sigma2.bottomRows(part.neural_rows());
      const Matrix g_m = y - tw.pois_exp.cwiseProduct(tw.pois_mask);
      const Matrix g_v = -0.5 * tw.pois_exp.cwiseProduct(tw.pois_mask);
      const Matrix a_time = mu_sb * model.basis.rows;       // Psb x T
      const Matrix s_time = sig_sb * basis_sq;              // Psb x T
      Matrix g_w = g_m * a_time.transpose();
      g_w += 2.0 * w_neural.cwiseProduct(g_v * s_time.transpose());
      grads->loadings.w_s2 += g_w.leftCols(part.p_s);
      grads->loadings.w_b += g_w.rightCols(part.p_b);
      grads->loadings.d_b += g_m.rowwise().sum();
      tw.g_mu.bottomRows(part.neural_rows()).noalias() +=
          w_neural.transpose() * g_m * model.basis.rows.transpose();
      tw.g_sigma2.bottomRows(part.neural_rows()).noalias() +=
          w_neural.cwiseAbs2().transpose() * g_v * basis_sq.transpose();
    }
  }

  // sampled-path backward
  if (sampled) {
    std::vector<std::vector<Matrix>> g_z(static_cast<std::size_t>(n_trials));
    for (Index i = 0; i < n_trials; ++i)
      g_z[static_cast<std::size_t>(i)]
          .assign(static_cast<std::size_t>(n_samples), Matrix::Zero(p_total, t_bins));

    if (cfg.has_behavior()) {
      Matrix g_pred(cfg.m_dim, t_bins * n_trials * n_samples);
      double g_log_sigma_y2 = 0.0;
      const double mt = static_cast<double>(cfg.m_dim * t_bins);
      for (Index i = 0; i < n_trials; ++i) {
        const Matrix& y = *trials[static_cast<std::size_t>(i)].y_a;
        for (Index s = 0; s < n_samples; ++s) {
          const Index c0 = (i * n_samples + s) * t_bins;
          const Matrix resid = y - preds.middleCols(c0, t_bins);
          g_pred.middleCols(c0, t_bins) = resid * (inv_s / sigma_y2);
          g_log_sigma_y2 += inv_s * (-0.5 * mt + 0.5 * resid.squaredNorm() / sigma_y2);
        }
      }
      grads->log_sigma_y2 += g_log_sigma_y2;
      const Matrix g_x_all = mlp_backward(model.decoder, cache_dec, g_pred, grads->decoder);
      for (Index i = 0; i < n_trials; ++i) {
        TrialWork& tw = work[static_cast<std::size_t>(i)];
        for (Index s = 0; s < n_samples; ++s) {
          const Index c0 = (i * n_samples + s) * t_bins;
          const auto g_x = g_x_all.middleCols(c0, t_bins);
          const Matrix& z = tw.z[static_cast<std::size_t>(s)];
          Matrix& gz = g_z[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
          if (part.p_a > 0) {
            grads->loadings.w_a.noalias() += g_x * z.topRows(part.p_a).transpose();
            gz.topRows(part.p_a).noalias() += model.loadings.w_a.transpose() * g_x;
          }
          if (part.p_s > 0) {
            grads->loadings.w_s1.noalias() +=
                g_x * z.middleRows(part.p_a, part.p_s).transpose();
            gz.middleRows(part.p_a, part.p_s).noalias() +=
                model.loadings.w_s1.transpose() * g_x;
          }
          grads->loadings.d_a += g_x.rowwise().sum();
        }
      }
    }

    if (cfg.has_neural() && cfg.neural_kind == NeuralKind::kGaussian) {
      const double t_d = static_cast<double>(t_bins);
      for (Index i = 0; i < n_trials; ++i) {
        TrialWork& tw = work[static_cast<std::size_t>(i)];
        const Matrix& y = *trials[static_cast<std::size_t>(i)].y_b;
        for (Index s = 0; s < n_samples; ++s) {
          const Matrix& z = tw.z[static_cast<std::size_t>(s)];
          Matrix x = model.loadings.d_b.replicate(1, t_bins);
          if (part.p_s > 0)
            x.noalias() += model.loadings.w_s2 * z.middleRows(part.p_a, part.p_s);
          if (part.p_b > 0) x.noalias() += model.loadings.w_b * z.bottomRows(part.p_b);
          Matrix resid = y - x;
          Matrix g_x = resid.array().colwise() * (inv_s / sigma_n2.array());
          Matrix& gz = g_z[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
          if (part.p_s > 0) {
            grads->loadings.w_s2.noalias() +=
                g_x * z.middleRows(part.p_a, part.p_s).transpose();
            gz.middleRows(part.p_a, part.p_s).noalias() +=
                model.loadings.w_s2.transpose() * g_x;
          }
          if (part.p_b > 0) {
            grads->loadings.w_b.noalias() += g_x * z.bottomRows(part.p_b).transpose();
            gz.bottomRows(part.p_b).noalias() += model.loadings.w_b.transpose() * g_x;
          }
          grads->loadings.d_b += g_x.rowwise().sum();
          for (Index r = 0; r < cfg.n_dim; ++r)
            grads->log_sigma_n2[r] +=
                inv_s * (-0.5 * t_d + 0.5 * resid.row(r).squaredNorm() / sigma_n2[r]);
        }
      }
    }

    // reparameterization: z = mu + sqrt(sigma2) .* eps
    for (Index i = 0; i < n_trials; ++i) {
      TrialWork& tw = work[static_cast<std::size_t>(i)];
      for (Index s = 0; s < n_samples; ++s) {
        const Matrix& gz = g_z[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
        const Matrix g_zt = fourier ? Matrix(gz * model.basis.rows.transpose()) : gz;
        tw.g_mu += g_zt;
        tw.g_sigma2.array() +=
            g_zt.array() *
            noise[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)].array() /
            (2.0 * tw.post.sigma2.array().sqrt());
      }
    }
  }

  // encoder backward
  Matrix g_h_a_all, g_h_b_all;
  if (cfg.has_behavior()) g_h_a_all.setZero(h_a_all.rows(), h_a_all.cols());
  if (cfg.has_neural()) g_h_b_all.setZero(h_b_all.rows(), h_b_all.cols());
  for (Index i = 0; i < n_trials; ++i) {
    TrialWork& tw = work[static_cast<std::size_t>(i)];
    const Matrix g_pre =
        tw.g_sigma2.cwiseProduct(tw.pre_sigma.unaryExpr([](double x) { return sigmoid(x); }));
    if (fourier) {
      Matrix g_u_a_mu, g_u_a_sig, g_u_b_mu, g_u_b_sig;
      if (cfg.has_behavior()) {
        g_u_a_mu = Matrix::Zero(part.behavior_rows(), f_eff);
        g_u_a_sig = Matrix::Zero(part.behavior_rows(), f_eff);
      }
      if (cfg.has_neural()) {
        g_u_b_mu = Matrix::Zero(part.neural_rows(), f_eff);
        g_u_b_sig = Matrix::Zero(part.neural_rows(), f_eff);
      }
      split_modality_grads(tw.g_mu, g_pre, part, g_u_a_mu, g_u_a_sig, g_u_b_mu, g_u_b_sig);
      if (cfg.has_behavior()) {
        const Matrix h = h_a_all.middleCols(i * t_bins, t_bins);
        g_h_a_all.middleCols(i * t_bins, t_bins) +=
            model.l_mu.backward(h, g_u_a_mu, grads->l_mu);
        g_h_a_all.middleCols(i * t_bins, t_bins) +=
            model.l_sigma.backward(h, g_u_a_sig, grads->l_sigma);
      }
      if (cfg.has_neural()) {
        const Matrix h = h_b_all.middleCols(i * t_bins, t_bins);
        g_h_b_all.middleCols(i * t_bins, t_bins) +=
            model.l_mu.backward(h, g_u_b_mu, grads->l_mu);
        g_h_b_all.middleCols(i * t_bins, t_bins) +=
            model.l_sigma.backward(h, g_u_b_sig, grads->l_sigma);
      }
    } else {
      g_h_a_all.middleCols(i * t_bins, t_bins).topRows(p_total) += tw.g_mu;
      g_h_a_all.middleCols(i * t_bins, t_bins).bottomRows(p_total) += g_pre;
    }
  }
  if (cfg.has_behavior()) mlp_backward(model.enc_a, cache_a, g_h_a_all, grads->enc_a);
  if (cfg.has_neural()) mlp_backward(model.enc_b, cache_b, g_h_b_all, grads->enc_b);

  // kernel hyperparameters through the circulant spectrum
  if (fourier) {
    Vector ds_rho, ds_ell;
    for (Index p = 0; p < p_total; ++p) {
      KernelParams kp{std::exp(model.log_rho[p]), std::exp(model.log_ell[p]), cfg.alpha};
      kernel_spectrum_grads(kp, model.basis, ds_rho, ds_ell);
      grads->log_rho[p] += grad_s_total.row(p).dot(ds_rho);
      grads->log_ell[p] += grad_s_total.row(p).dot(ds_ell);
    }
  }

  return total;
}

}  // namespace mmgpvae
