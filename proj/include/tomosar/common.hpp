#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tomosar {

using Complex = std::complex<double>;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Independent generator stream for item `index` of a run seeded with `seed`.
// Parallel and serial consumers get identical streams.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index = 0, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. threads <= 1 runs inline.
// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

// Worker count used when a caller passes 0.
unsigned default_threads();

}  // namespace tomosar
