#include "mmgpvae/simulation.hpp"

#include "mmgpvae/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>

using namespace mmgpvae;

TEST_CASE("gp trajectories: huge length scale gives constant draws") {
  SimConfig cfg;
  cfg.trials = 5;
  cfg.t_bins = 20;
  cfg.kernel = {1.0, 1e6, 1e-8};  // increments scale like T/ell plus sqrt(alpha) jitter
  cfg.seed = 1;
  const auto latents = sample_gp_trajectories(cfg);
  for (const Matrix& z : latents)
    for (Index p = 0; p < 3; ++p)
      CHECK(z.row(p).maxCoeff() - z.row(p).minCoeff() < 1e-3 * cfg.kernel.rho);
}

TEST_CASE("gp trajectories: sample covariance matches the kernel") {
  SimConfig cfg;
  cfg.trials = 10000;
  cfg.t_bins = 8;
  cfg.kernel = {1.0, 2.5, 1e-2};
  cfg.seed = 2;
  const auto latents = sample_gp_trajectories(cfg);
  const Index t1 = 1, t2 = 5;
  double m1 = 0, m2 = 0, cross = 0;
  for (const Matrix& z : latents) {
    m1 += z(0, t1);
    m2 += z(0, t2);
    cross += z(0, t1) * z(0, t2);
  }
  const double n = static_cast<double>(cfg.trials);
  const double cov = cross / n - (m1 / n) * (m2 / n);
  const double d = static_cast<double>(t2 - t1);
  const double expected = std::exp(-d * d / (2.0 * cfg.kernel.ell * cfg.kernel.ell));
  // var of a covariance estimate of jointly gaussian pairs ~ (1 + rho^2)/n
  const double se = std::sqrt((1.0 + expected * expected) / n);
  CHECK(std::abs(cov - expected) < 3.0 * se);
}

TEST_CASE("gp trajectories: fixed seed reproduces draws bitwise") {
  SimConfig cfg;
  cfg.trials = 4;
  cfg.t_bins = 12;
  cfg.seed = 3;
  const auto a = sample_gp_trajectories(cfg);
  const auto b = sample_gp_trajectories(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("render: identity transform returns the template") {
  const Matrix glyph = load_template_glyph("", 28);
  const Matrix frame = render_frame(glyph, 0.0, 1.0);
  CHECK((frame - glyph).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("render: full turn equals no turn") {
  const Matrix glyph = load_template_glyph("", 28);
  const Matrix a = render_frame(glyph, 360.0, 1.0);
  const Matrix b = render_frame(glyph, 0.0, 1.0);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("render: quarter turn matches the index-permutation oracle") {
  Rng rng(4);
  const Index side = 8;
  Matrix pattern(side, side);
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) pattern(r, c) = rng.uniform();
  const Matrix rotated = render_frame(pattern, 90.0, 1.0);
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c)
      CHECK(rotated(r, c) == doctest::Approx(pattern(side - 1 - c, r)).epsilon(1e-10));
}

TEST_CASE("render: pixel values stay inside the unit interval") {
  const Matrix glyph = load_template_glyph("", 28);
  for (double angle : {-77.0, 13.0, 151.0})
    for (double scale : {0.6, 1.0, 1.4}) {
      const Matrix frame = render_frame(glyph, angle, scale);
      CHECK(frame.minCoeff() >= 0.0);
      CHECK(frame.maxCoeff() <= 1.0);
    }
}

TEST_CASE("template loading: user file parsing and validation") {
  const std::string path = "test_template_glyph.txt";
  {
    std::ofstream out(path);
    out << "0.0 0.5\n1.0 0.25\n";
  }
  const Matrix glyph = load_template_glyph(path, 2);
  CHECK(glyph(0, 1) == 0.5);
  CHECK(glyph(1, 0) == 1.0);
  {
    std::ofstream out(path);
    out << "0.0 0.5\n";  // one row short
  }
  CHECK_THROWS_AS(load_template_glyph(path, 2), IoError);
  {
    std::ofstream out(path);
    out << "0.0 2.5\n0.0 0.0\n";  // out of range
  }
  CHECK_THROWS_AS(load_template_glyph(path, 2), IoError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_template_glyph("no_such_glyph.txt", 2), IoError);
}

TEST_CASE("spikes: unit rate has unit empirical mean") {
  const Index t_bins = 100000;
  const Vector zeros = Vector::Zero(t_bins);
  const Matrix counts = sample_spikes(zeros, zeros, Vector::Ones(1), Vector::Ones(1),
                                      Vector::Zero(1), 9);
  const double mean = counts.sum() / static_cast<double>(t_bins);
  const double se = 1.0 / std::sqrt(static_cast<double>(t_bins));
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("spikes: offset shift scales the mean log-linearly") {
  const Index t_bins = 200000;
  const Vector zeros = Vector::Zero(t_bins);
  const Vector w = Vector::Zero(1);
  const Matrix base =
      sample_spikes(zeros, zeros, w, w, Vector::Constant(1, std::log(2.0)), 10);
  const Matrix shifted =
      sample_spikes(zeros, zeros, w, w, Vector::Constant(1, std::log(2.0) + 1.0), 11);
  const double m0 = base.sum() / static_cast<double>(t_bins);
  const double m1 = shifted.sum() / static_cast<double>(t_bins);
  // log of the empirical means differs by the offset shift
  const double se = std::sqrt(2.0 * std::exp(1.0) / static_cast<double>(t_bins)) /
                    (2.0 * std::exp(1.0));
  CHECK(std::abs(std::log(m1) - std::log(m0) - 1.0) < 5.0 * se);
}

TEST_CASE("spikes: deterministic under a fixed seed, guards on loadings") {
  const Vector z = Vector::LinSpaced(50, -1.0, 1.0);
  const Vector w = Vector::Constant(3, 0.4);
  const Vector d = Vector::Zero(3);
  const Matrix a = sample_spikes(z, z, w, w, d, 12);
  const Matrix b = sample_spikes(z, z, w, w, d, 12);
  CHECK(a == b);
  Vector bad = w;
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sample_spikes(z, z, bad, w, d, 12), ParameterError);
}

TEST_CASE("simulate: defaults give the documented split and bounded data") {
  SimConfig cfg;
  cfg.trials = 30;  // desk-scale stand-in; split fractions as in the default
  cfg.t_bins = 12;
  cfg.image_side = 8;
  cfg.neurons = 10;
  cfg.seed = 13;
  const Dataset data = simulate(cfg);
  CHECK(data.train_idx.size() == 24);
  CHECK(data.test_idx.size() == 6);
  CHECK(data.trials.size() == 30);
  CHECK(data.m_dim == 64);
  for (const Trial& tr : data.trials) {
    CHECK(tr.y_a.minCoeff() >= 0.0);
    CHECK(tr.y_a.maxCoeff() <= 1.0);
    CHECK(tr.y_b.minCoeff() >= 0.0);
    for (Index j = 0; j < tr.y_b.cols(); ++j)
      for (Index i = 0; i < tr.y_b.rows(); ++i)
        CHECK(tr.y_b(i, j) == std::floor(tr.y_b(i, j)));
  }
  CHECK(data.truth.has_latents());
  CHECK(data.truth.has_rates());
  CHECK(data.truth.has_clean_images());
}

TEST_CASE("simulate: reproducible from (seed, config) alone") {
  SimConfig cfg;
  cfg.trials = 6;
  cfg.t_bins = 10;
  cfg.image_side = 6;
  cfg.neurons = 5;
  cfg.seed = 14;
  const Dataset a = simulate(cfg);
  const Dataset b = simulate(cfg);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].y_a == b.trials[i].y_a);
    CHECK(a.trials[i].y_b == b.trials[i].y_b);
  }
  CHECK(a.train_idx == b.train_idx);
}

TEST_CASE("simulate: shared latent drives the neural principal trajectory") {
  SimConfig cfg;
  cfg.trials = 40;
  cfg.t_bins = 30;
  cfg.image_side = 6;
  cfg.neurons = 20;
  cfg.seed = 15;
  const Dataset data = simulate(cfg);

  // first principal direction of the true log-rates across (trials x time)
  const Index cols = cfg.trials * cfg.t_bins;
  Matrix logrates(cfg.neurons, cols);
  Vector z_s(cols), z_a(cols);
  for (Index i = 0; i < cfg.trials; ++i) {
    logrates.middleCols(i * cfg.t_bins, cfg.t_bins) =
        data.truth.rates[static_cast<std::size_t>(i)].array().log();
    z_a.segment(i * cfg.t_bins, cfg.t_bins) =
        data.truth.latents[static_cast<std::size_t>(i)].row(0).transpose();
    z_s.segment(i * cfg.t_bins, cfg.t_bins) =
        data.truth.latents[static_cast<std::size_t>(i)].row(1).transpose();
  }
  const Vector mean = logrates.rowwise().mean();
  const Matrix centered = logrates.colwise() - mean;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered * centered.transpose());
  const Vector pc1 = eig.eigenvectors().col(cfg.neurons - 1);
  const Vector proj = centered.transpose() * pc1;
  auto abs_corr = [&](const Vector& x, const Vector& y) {
    const Vector xc = x.array() - x.mean();
    const Vector yc = y.array() - y.mean();
    return std::abs(xc.dot(yc)) / (xc.norm() * yc.norm());
  };
  CHECK(abs_corr(proj, z_s) > abs_corr(proj, z_a));
}

TEST_CASE("simulate: degenerate configs rejected") {
  SimConfig cfg;
  cfg.t_bins = 1;
  CHECK_THROWS_AS(simulate(cfg), ConfigError);
  cfg.t_bins = 10;
  cfg.train_fraction = 1.0;
  CHECK_THROWS_AS(simulate(cfg), ConfigError);
  cfg.train_fraction = 0.8;
  cfg.scale_lo = 1.4;
  cfg.scale_hi = 0.6;
  CHECK_THROWS_AS(simulate(cfg), ConfigError);
}
