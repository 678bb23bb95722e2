#pragma once

// Shared plumbing: error hierarchy, seeded random streams, small numeric helpers.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ssdl {

// Base for every error the library raises. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Inputs that violate a documented precondition (shape mismatch, too few rows, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Arithmetic broke down (singular covariance, non-finite loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-streams from (seed, index).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ (stream * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(seed, a), b);
}

// round-half-up(f * n), capped to [0, n]. The 1e-9 slack absorbs binary
// representation error so that e.g. 0.35 * 90 = 31.5 rounds to 32.
inline std::size_t round_half_up_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw DataError("fraction must lie in [0, 1], got " + std::to_string(fraction));
  }
  const double scaled = std::floor(fraction * static_cast<double>(n) + 0.5 + 1e-9);
  const auto count = static_cast<std::size_t>(scaled < 0.0 ? 0.0 : scaled);
  return count > n ? n : count;
}

// Beta(a, b) via two gamma draws.
inline double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  if (x + y <= 0.0) return 0.5;
  return x / (x + y);
}

}  // namespace ssdl
