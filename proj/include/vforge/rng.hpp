#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace vforge {

/// Seedable deterministic generator over std::mt19937_64 with portable
/// uniform, normal and index draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Seed of a child stream identified by `label`. Pure function of both.
  static std::uint64_t derive(std::uint64_t seed, std::string_view label);
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t label);

  Rng child(std::string_view label) const { return Rng(derive(seed_, label)); }
  Rng child(std::uint64_t label) const { return Rng(derive(seed_, label)); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; no cached second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Unbiased integer on [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a, used for fingerprints and label hashing.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace vforge
