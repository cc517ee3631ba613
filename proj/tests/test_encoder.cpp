#include "mmgpvae/encoder.hpp"

#include "mmgpvae/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace mmgpvae;

namespace {

struct Fixture {
  LatentPartition part{1, 1, 1};
  Index m = 6, n = 4, t_bins = 8, f_bins = 5;
  Mlp enc_a, enc_b;
  LinearMap l_mu, l_sigma;

  explicit Fixture(std::uint64_t seed, LatentPartition p = {1, 1, 1}) : part(p) {
    Rng rng(seed);
    enc_a = Mlp::make(m, {5}, part.behavior_rows(), rng);
    enc_b = Mlp::make(n, {4}, part.neural_rows(), rng);
    l_mu.weight = rng.normal_matrix(f_bins, t_bins);
    l_mu.bias = rng.normal_vector(f_bins);
    l_sigma.weight = rng.normal_matrix(f_bins, t_bins);
    l_sigma.bias = rng.normal_vector(f_bins);
  }

  EncoderStack stack(bool has_a = true, bool has_b = true) const {
    EncoderStack s;
    s.enc_a = has_a ? &enc_a : nullptr;
    s.enc_b = has_b ? &enc_b : nullptr;
    s.l_mu = &l_mu;
    s.l_sigma = &l_sigma;
    s.variance_floor = 1e-6;
    return s;
  }
};

}  // namespace

TEST_CASE("encode_trial: no cross-talk without shared latents") {
  Fixture fx(1, LatentPartition{2, 0, 1});
  Rng rng(2);
  const Matrix y_a = rng.normal_matrix(fx.m, fx.t_bins);
  const Matrix y_b = rng.normal_matrix(fx.n, fx.t_bins);
  const VariationalPosterior post = encode_trial(y_a, y_b, fx.stack(), fx.part);
  const VariationalPosterior zeroed =
      encode_trial(y_a, Matrix::Zero(fx.n, fx.t_bins), fx.stack(), fx.part);
  // behavior-latent rows identical bit for bit; only the neural row changes
  CHECK(post.mu.topRows(2) == zeroed.mu.topRows(2));
  CHECK(post.sigma2.topRows(2) == zeroed.sigma2.topRows(2));
}

TEST_CASE("encode_trial: deterministic on duplicate trials") {
  Fixture fx(3);
  Rng rng(4);
  const Matrix y_a = rng.normal_matrix(fx.m, fx.t_bins);
  const Matrix y_b = rng.normal_matrix(fx.n, fx.t_bins);
  const VariationalPosterior p1 = encode_trial(y_a, y_b, fx.stack(), fx.part);
  const VariationalPosterior p2 = encode_trial(y_a, y_b, fx.stack(), fx.part);
  CHECK(p1.mu == p2.mu);
  CHECK(p1.sigma2 == p2.sigma2);
}

TEST_CASE("encode_trial: shared rows are the sum of both mapped paths") {
  Fixture fx(5);
  Rng rng(6);
  const Matrix y_a = rng.normal_matrix(fx.m, fx.t_bins);
  const Matrix y_b = rng.normal_matrix(fx.n, fx.t_bins);
  const VariationalPosterior post = encode_trial(y_a, y_b, fx.stack(), fx.part);

  // manual forward pass: u = enc_a(y_a) rows, w = enc_b(y_b) rows
  const Matrix u = mlp_forward(fx.enc_a, y_a);
  const Matrix w = mlp_forward(fx.enc_b, y_b);
  const Matrix mu_a = fx.l_mu.apply(u);
  const Matrix mu_b = fx.l_mu.apply(w);
  const Matrix sig_a = fx.l_sigma.apply(u);
  const Matrix sig_b = fx.l_sigma.apply(w);
  // shared row: behavior path row 1 (after the A block), neural path row 0
  const Matrix expected_mu = mu_a.row(1) + mu_b.row(0);
  CHECK((post.mu.row(1) - expected_mu).cwiseAbs().maxCoeff() < 1e-12);
  // pre-positivity sums, then one softplus
  const Matrix pre = sig_a.row(1) + sig_b.row(0);
  for (Index k = 0; k < fx.f_bins; ++k)
    CHECK(post.sigma2(1, k) == doctest::Approx(softplus(pre(0, k)) + 1e-6).epsilon(1e-12));
  // modality-specific rows pass through unchanged
  CHECK((post.mu.row(0) - mu_a.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((post.mu.row(2) - mu_b.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode_trial: variance floor keeps sigma2 strictly positive") {
  Fixture fx(7);
  Rng rng(8);
  const Matrix y_a = rng.normal_matrix(fx.m, fx.t_bins) * 10.0;
  const Matrix y_b = rng.normal_matrix(fx.n, fx.t_bins) * 10.0;
  const VariationalPosterior post = encode_trial(y_a, y_b, fx.stack(), fx.part);
  CHECK(post.sigma2.minCoeff() >= 1e-6);
}

TEST_CASE("encode_trial: GPFA mode depends only on the neural data") {
  Fixture fx(9, LatentPartition{0, 1, 1});
  Rng rng(10);
  const Matrix y_b = rng.normal_matrix(fx.n, fx.t_bins);
  const Matrix junk1 = rng.normal_matrix(fx.m, fx.t_bins);
  const Matrix junk2 = rng.normal_matrix(fx.m, fx.t_bins);
  const VariationalPosterior p1 = encode_trial(junk1, y_b, fx.stack(false, true), fx.part);
  const VariationalPosterior p2 = encode_trial(junk2, y_b, fx.stack(false, true), fx.part);
  CHECK(p1.mu == p2.mu);
  CHECK(p1.sigma2 == p2.sigma2);
}

TEST_CASE("encode_trial: width mismatch with trained maps") {
  Fixture fx(11);
  Rng rng(12);
  const Matrix y_a = rng.normal_matrix(fx.m, fx.t_bins + 1);
  const Matrix y_b = rng.normal_matrix(fx.n, fx.t_bins + 1);
  CHECK_THROWS_AS(encode_trial(y_a, y_b, fx.stack(), fx.part), ParameterError);
}

TEST_CASE("sample_posterior: zero noise and zero variance") {
  Rng rng(13);
  VariationalPosterior post;
  post.mu = rng.normal_matrix(2, 4);
  post.sigma2 = rng.normal_matrix(2, 4).cwiseAbs2();
  CHECK(sample_posterior(post, Matrix::Zero(2, 4)) == post.mu);
  post.sigma2.setZero();
  CHECK(sample_posterior(post, rng.normal_matrix(2, 4)) == post.mu);
  CHECK_THROWS_AS(sample_posterior(post, Matrix::Zero(3, 4)), ParameterError);
}

TEST_CASE("sample_posterior: sample moments match the posterior") {
  Rng rng(14);
  VariationalPosterior post;
  post.mu = rng.normal_matrix(1, 3);
  post.sigma2 = rng.normal_matrix(1, 3).cwiseAbs2().array() + 0.2;
  const Index draws = 100000;
  Matrix sum = Matrix::Zero(1, 3), sum2 = Matrix::Zero(1, 3);
  for (Index i = 0; i < draws; ++i) {
    const Matrix z = sample_posterior(post, rng.normal_matrix(1, 3));
    sum += z;
    sum2 += z.cwiseAbs2();
  }
  const Matrix mean = sum / static_cast<double>(draws);
  const Matrix var = sum2 / static_cast<double>(draws) - mean.cwiseAbs2();
  for (Index k = 0; k < 3; ++k) {
    const double se_mean = std::sqrt(post.sigma2(0, k) / static_cast<double>(draws));
    CHECK(std::abs(mean(0, k) - post.mu(0, k)) < 3.0 * se_mean);
    const double se_var = post.sigma2(0, k) * std::sqrt(2.0 / static_cast<double>(draws));
    CHECK(std::abs(var(0, k) - post.sigma2(0, k)) < 3.0 * se_var);
  }
}

TEST_CASE("sample_posterior: reparameterization gradients match finite differences") {
  Rng rng(15);
  VariationalPosterior post;
  post.mu = rng.normal_matrix(2, 3);
  post.sigma2 = rng.normal_matrix(2, 3).cwiseAbs2().array() + 0.3;
  const Matrix eps = rng.normal_matrix(2, 3);
  // smooth functional: sum sin(z)
  auto f = [&](const VariationalPosterior& p) {
    return sample_posterior(p, eps).array().sin().sum();
  };
  const Matrix z = sample_posterior(post, eps);
  const Matrix dmu = z.array().cos();
  const Matrix dsig = z.array().cos() * eps.array() / (2.0 * post.sigma2.array().sqrt());
  const double h = 1e-6;
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 3; ++c) {
      VariationalPosterior up = post, dn = post;
      up.mu(r, c) += h;
      dn.mu(r, c) -= h;
      const double fd_mu = (f(up) - f(dn)) / (2.0 * h);
      CHECK(std::abs(fd_mu - dmu(r, c)) / std::max(1.0, std::abs(fd_mu)) < 1e-4);
      up = post;
      dn = post;
      up.sigma2(r, c) += h;
      dn.sigma2(r, c) -= h;
      const double fd_sig = (f(up) - f(dn)) / (2.0 * h);
      CHECK(std::abs(fd_sig - dsig(r, c)) / std::max(1.0, std::abs(fd_sig)) < 1e-4);
    }
}
