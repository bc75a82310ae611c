#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "fedsim/rng.hpp"

using fedsim::rng::derive;
using fedsim::rng::Stream;

TEST_CASE("derive is deterministic and sensitive to every component") {
  CHECK(derive(1, "labels", 2, 3) == derive(1, "labels", 2, 3));
  CHECK(derive(1, "labels", 2, 3) != derive(2, "labels", 2, 3));
  CHECK(derive(1, "labels", 2, 3) != derive(1, "features", 2, 3));
  CHECK(derive(1, "labels", 2, 3) != derive(1, "labels", 3, 3));
  CHECK(derive(1, "labels", 2, 3) != derive(1, "labels", 2, 4));
}

TEST_CASE("streams with the same seed produce identical sequences") {
  Stream a(42, "test");
  Stream b(42, "test");
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
}

TEST_CASE("uniform stays in [0,1) and is roughly centered") {
  Stream s(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below(n) covers the full range without bias") {
  Stream s(11);
  std::vector<int> hits(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t v = s.below(5);
    REQUIRE(v < 5);
    ++hits[v];
  }
  for (int h : hits) CHECK(h == doctest::Approx(n / 5.0).epsilon(0.05));
}

TEST_CASE("normal matches N(0,1) moments") {
  Stream s(3);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gamma(shape) matches mean and variance for several shapes") {
  for (double shape : {0.5, 1.0, 2.0, 5.0}) {
    Stream s(17);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = s.gamma(shape);
      REQUIRE(x >= 0.0);
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(shape).epsilon(0.03));
    CHECK(var == doctest::Approx(shape).epsilon(0.08));
  }
}

TEST_CASE("dirichlet draws live on the simplex with the right coordinate mean") {
  Stream s(23);
  const std::size_t k = 4;
  const int n = 20000;
  std::vector<double> coord_sum(k, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto p = s.dirichlet(2.0, k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      REQUIRE(p[j] > 0.0);
      sum += p[j];
      coord_sum[j] += p[j];
    }
    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(coord_sum[j] / n == doctest::Approx(1.0 / k).epsilon(0.03));
  }
}

TEST_CASE("shuffle permutes without loss and is seed-deterministic") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto a = v;
  auto b = v;
  Stream s1(9, "shuffle");
  Stream s2(9, "shuffle");
  s1.shuffle(a);
  s2.shuffle(b);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);
  Stream s3(10, "shuffle");
  auto c = v;
  s3.shuffle(c);
  CHECK(c != a);
}
