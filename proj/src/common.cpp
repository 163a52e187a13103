#include "wkflow/common.hpp"

#include <cmath>

namespace wkflow {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kMissingInput:
      return 1;
    case ErrorKind::kParameter:
    case ErrorKind::kDomain:
      return 2;
    case ErrorKind::kIntegrity:
      return 3;
    case ErrorKind::kShape:
      return 4;
    case ErrorKind::kNumerical:
    case ErrorKind::kGeneration:
      return 5;
  }
  return 5;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                          std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(root) ^ stream) + index);
}

std::uint64_t stream_tag(const std::string& name) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
  // Lemire-style rejection would be tighter; the modulo bias for n < 2^20 is
  // below 2^-44 and irrelevant here.
  return static_cast<std::size_t>(engine_() % n);
}

double Rng::exponential() {
  double u = uniform();
  return -std::log1p(-u);
}

}  // namespace wkflow
