#include "tdkps/random.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace tdkps;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First outputs of the reference generator seeded with 0.
  const std::uint64_t gamma = 0x9e3779b97f4a7c15ULL;
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(gamma) == 0x6e789e6aa1b965f4ULL);
  CHECK(splitmix64(2 * gamma) == 0x06c45d188009454fULL);
}

TEST_CASE("derived seeds depend on every path element") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(42, {a, b}));
  CHECK(seen.size() == 400);
  CHECK(derive_seed(42, {1, 2}) != derive_seed(42, {2, 1}));
  CHECK(derive_seed(42, {1}) != derive_seed(43, {1}));
  CHECK(derive_seed(7, {3, 4}) == derive_seed(7, {3, 4}));
}

TEST_CASE("same seed, same stream") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c(5, {1, 2}), d(5, {1, 2});
  for (int i = 0; i < 100; ++i) CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("uniform, below and normal are distributed as advertised") {
  Rng rng(2024);
  std::vector<double> u(4000);
  for (auto& x : u) {
    x = rng.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  CHECK(oracle::ks_uniform_pvalue(u) > 0.001);

  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);

  // Probability-integral transform of the normals must be uniform.
  std::vector<double> z(4000);
  double sum = 0, sum2 = 0;
  for (auto& x : z) {
    const double v = rng.normal();
    sum += v;
    sum2 += v * v;
    x = 1.0 - oracle::normal_sf(v);
  }
  CHECK(oracle::ks_uniform_pvalue(z) > 0.001);
  CHECK(std::abs(sum / 4000) < 0.06);
  CHECK(std::abs(sum2 / 4000 - 1.0) < 0.08);
}

TEST_CASE("shuffle is a uniformly random permutation") {
  Rng rng(11);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) {
    std::array<int, 3> v{0, 1, 2};
    rng.shuffle(v.begin(), v.end());
    const int code = v[0] * 2 + (v[1] > v[2] ? 1 : 0);
    ++counts[code];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);

  std::vector<int> w(50);
  std::iota(w.begin(), w.end(), 0);
  rng.shuffle(w.begin(), w.end());
  std::vector<int> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}
