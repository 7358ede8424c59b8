#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace gaan {

using Index = std::ptrdiff_t;
using NodeId = std::int64_t;

/// Row-major dense matrix used for every feature, parameter and gradient.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed files, bad magic, truncated payloads.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Independent stream keyed by (seed, keys...). Used wherever a run needs
/// per-epoch / per-step / per-batch randomness that must not depend on how
/// much randomness earlier stages consumed.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

}  // namespace gaan
