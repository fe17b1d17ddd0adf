#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include "agscan/rng.hpp"

using namespace agscan;

TEST_CASE("same seed reproduces the sequence, different seeds diverge") {
  Rng a(99), b(99), c(100);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    if (x != c.next_u64()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("derive_seed is stable per label and separates labels") {
  CHECK(derive_seed(42, "training") == derive_seed(42, "training"));
  CHECK(derive_seed(42, "training") != derive_seed(42, "model-init"));
  CHECK(derive_seed(42, "training") != derive_seed(43, "training"));
}

TEST_CASE("next_unit stays in the half-open unit interval") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_below respects the bound and covers small ranges") {
  Rng rng(6);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    std::uint64_t v = rng.next_below(7);
    REQUIRE(v < 7);
    counts[v]++;
  }
  // Expected 10000 per bucket; 600 is ~6 sigma for a binomial(70000, 1/7).
  for (int c : counts) CHECK(std::abs(c - 10000) < 600);
  CHECK_THROWS_AS(rng.next_below(0), ContractError);
}

TEST_CASE("sample_indices draws k distinct in-range values") {
  Rng rng(7);
  auto s = rng.sample_indices(100, 30);
  REQUIRE(s.size() == 30);
  std::set<std::size_t> uniq(s.begin(), s.end());
  CHECK(uniq.size() == 30);
  for (std::size_t v : s) CHECK(v < 100);

  auto full = rng.sample_indices(10, 10);
  std::sort(full.begin(), full.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(full[i] == i);

  CHECK_THROWS_AS(rng.sample_indices(3, 4), ContractError);
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> w = v;
  Rng r1(8), r2(8);
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("next_gauss has roughly standard moments") {
  Rng rng(9);
  const int n = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = rng.next_gauss();
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}
