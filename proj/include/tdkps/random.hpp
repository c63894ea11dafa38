#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace tdkps {

/// Identifies the generator stack so that seeds stay meaningful across
/// releases: mt19937_64 engine, splitmix64 substream derivation, 53-bit
/// uniforms, Marsaglia polar normals.
inline constexpr const char* kGeneratorVersion = "mt19937_64/splitmix64/polar-v1";

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic child seed for (seed, path...). Distinct paths give
/// statistically independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Seeded random stream. All distributions are implemented here rather than
/// through <random> so that draws are identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
      : engine_(derive_seed(seed, path)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1),
                     first + static_cast<std::ptrdiff_t>(j));
    }
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tdkps
