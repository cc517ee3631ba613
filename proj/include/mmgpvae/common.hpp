#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmgpvae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

/// Invalid model/kernel/dimension arguments.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A quantity left the numeric domain (nonpositive variance, etc.).
struct NumericError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Malformed configuration file or option set. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite objective. CLI exit code 3.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem or format failure, always carrying the path. CLI exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

/// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t seed_stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  return mix64(mix64(mix64(master ^ (a * 0xd1342543de82ef95ull)) ^
                     (b * 0xaf251af3b0f025b5ull)) ^
               (c * 0x9e6c63d0876a9a35ull));
}

}  // namespace mmgpvae
