// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedlmd/rng.hpp"

using namespace fedlmd;

TEST_CASE("streams are deterministic and tag-separated") {
  Rng a(42, "select", 0, 7);
  Rng b(42, "select", 0, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42, "select", 0, 8);
  Rng d(42, "shuffle", 0, 7);
  Rng e(43, "select", 0, 7);
  Rng f(42, "select", 0, 7);
  CHECK(c.next_u64() != f.next_u64());
  CHECK(d.next_u64() != Rng(42, "select", 0, 7).next_u64());
  CHECK(e.next_u64() != Rng(42, "select", 0, 7).next_u64());
}

TEST_CASE("uniform stays in range and looks flat") {
  Rng rng(1, "test");
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("below is unbiased over small ranges") {
  Rng rng(2, "test");
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(rng.below(7))];
  for (int c : counts) CHECK(std::abs(c - n / 7) < 400);  // ~4 sigma
}

TEST_CASE("normal has the right first two moments") {
  Rng rng(3, "test");
  double m = 0.0, s = 0.0;
  const int n = 200000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = rng.normal();
  for (double x : xs) m += x;
  m /= n;
  for (double x : xs) s += (x - m) * (x - m);
  s = std::sqrt(s / n);
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(s - 1.0) < 0.01);
}

TEST_CASE("gamma matches its mean/variance for small and large shape") {
  for (double shape : {0.05, 0.5, 2.0, 1e6}) {
    Rng rng(4, "test", static_cast<uint64_t>(shape * 100));
    const int n = 50000;
    double m = 0.0;
    std::vector<double> xs(n);
    for (auto& x : xs) {
      x = rng.gamma(shape);
      CHECK(x >= 0.0);
      m += x;
    }
    m /= n;
    // mean = shape, sd of the sample mean = sqrt(shape/n)
    CHECK(std::abs(m - shape) < 5.0 * std::sqrt(shape / n) + 1e-9 * shape);
  }
}

TEST_CASE("dirichlet sums to one") {
  Rng rng(5, "test");
  for (double alpha : {0.05, 1.0, 1e6}) {
    auto p = rng.dirichlet(alpha, 10);
    double sum = std::accumulate(p.begin(), p.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (double x : p) CHECK(x >= 0.0);
  }
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  Rng a(6, "shuffle", 1, 2), b(6, "shuffle", 1, 2);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}
