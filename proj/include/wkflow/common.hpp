#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace wkflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Failure categories. The CLI maps each one onto a process exit code.
enum class ErrorKind {
  kMissingInput,   // exit 1
  kParameter,      // exit 2
  kIntegrity,      // exit 3
  kShape,          // exit 4
  kNumerical,      // exit 5
  kDomain,         // exit 2
  kGeneration,     // exit 5
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

// ---------------------------------------------------------------------------
// Randomness. Every stochastic stage draws from its own engine whose seed is a
// counter-based split of one 64-bit root seed, so results do not depend on the
// order in which independent stages run.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for the `index`-th draw of stream `stream` under `root`.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                          std::uint64_t index = 0) noexcept;

/// Stable 64-bit tag for a stream name (FNV-1a of the bytes).
std::uint64_t stream_tag(const std::string& name) noexcept;

/// Small wrapper around std::mt19937_64 with portable real-valued draws
/// (the standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::size_t below(std::size_t n);
  /// Standard exponential variate.
  double exponential();

 private:
  std::mt19937_64 engine_;
};

}  // namespace wkflow
