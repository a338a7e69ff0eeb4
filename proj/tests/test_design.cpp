#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "abmuq/design.hpp"
#include "abmuq/errors.hpp"

using namespace abmuq;
using namespace abmuq::design;

TEST_CASE("lhd of one point") {
  Rng rng(1);
  const DesignMatrix X = lhd(1, 3, rng);
  CHECK(X.rows() == 1);
  CHECK((X.array() >= 0.0).all());
  CHECK((X.array() < 1.0).all());
  CHECK(is_latin_hypercube(X));
}

TEST_CASE("lhd n=4 p=1 puts one point in each quarter") {
  Rng rng(2);
  DesignMatrix X = lhd(4, 1, rng);
  std::vector<double> v(X.data(), X.data() + 4);
  std::sort(v.begin(), v.end());
  for (int i = 0; i < 4; ++i) {
    CHECK(v[static_cast<std::size_t>(i)] >= i * 0.25);
    CHECK(v[static_cast<std::size_t>(i)] < (i + 1) * 0.25);
  }
}

TEST_CASE("stratification property over random sizes") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 200));
    const int p = 1 + static_cast<int>(uniform_index(rng, 10));
    CHECK(is_latin_hypercube(lhd(n, p, rng)));
  }
}

TEST_CASE("is_latin_hypercube rejects a doubled stratum") {
  DesignMatrix X(2, 1);
  X << 0.1, 0.2;
  CHECK_FALSE(is_latin_hypercube(X));
}

TEST_CASE("min_pairwise_distance") {
  DesignMatrix same(2, 2);
  same << 0.3, 0.3, 0.3, 0.3;
  CHECK(min_pairwise_distance(same) == 0.0);
  DesignMatrix corners(2, 2);
  corners << 0, 0, 1, 1;
  CHECK(min_pairwise_distance(corners) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(min_pairwise_distance(DesignMatrix(1, 2)), ConfigError);

  // 1-D: sorted neighbour gaps give the same answer.
  Rng rng(4);
  DesignMatrix line(12, 1);
  for (int i = 0; i < 12; ++i) line(i, 0) = uniform01(rng);
  std::vector<double> v(line.data(), line.data() + 12);
  std::sort(v.begin(), v.end());
  double gap = 1.0;
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::min(gap, v[i] - v[i - 1]);
  CHECK(min_pairwise_distance(line) == doctest::Approx(gap).epsilon(1e-12));
}

TEST_CASE("maximin n=2 p=1 separates the points by at least one half") {
  Rng rng(5);
  const DesignMatrix X = maximin_lhd(2, 1, 3, rng);
  // Jittered strata guarantee one point on each side of 0.5, not a gap of
  // 0.5 itself.
  CHECK(is_latin_hypercube(X));
  CHECK(std::min(X(0, 0), X(1, 0)) < 0.5);
  CHECK(std::max(X(0, 0), X(1, 0)) >= 0.5);
}

TEST_CASE("maximin never loses to the plain LHD it started from") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng a(seed);
    const double plain = min_pairwise_distance(lhd(30, 2, a));
    Rng b(seed);
    const DesignMatrix opt = maximin_lhd(30, 2, 50, b);
    CHECK(min_pairwise_distance(opt) >= plain);
    CHECK(is_latin_hypercube(opt));
  }
}

TEST_CASE("maximin_swap is monotone and keeps strata") {
  Rng rng(6);
  DesignMatrix X = lhd(25, 3, rng);
  const SwapStats s = maximin_swap(X, 300, rng);
  CHECK(s.final_criterion >= s.initial_criterion);
  CHECK(s.final_criterion == doctest::Approx(min_pairwise_distance(X)));
  CHECK(is_latin_hypercube(X));
}

TEST_CASE("maximin_lhd is deterministic under a seed") {
  Rng a(9);
  Rng b(9);
  CHECK(maximin_lhd(10, 2, 5, a) == maximin_lhd(10, 2, 5, b));
}

TEST_CASE("maximin_subset picks spread points") {
  DesignMatrix pool(5, 1);
  pool << 0.0, 0.01, 0.5, 0.51, 1.0;
  const DesignMatrix s = maximin_subset(pool, 3);
  std::vector<double> v(s.data(), s.data() + 3);
  std::sort(v.begin(), v.end());
  CHECK(v[0] == 0.0);
  CHECK(v[2] == 1.0);
  CHECK((v[1] == 0.5 || v[1] == 0.51));
}

TEST_CASE("halton is low discrepancy and in the unit cube") {
  const DesignMatrix H = halton(512, 2);
  CHECK((H.array() > 0.0).all());
  CHECK((H.array() < 1.0).all());
  // Quadrant counts close to 128 each.
  int q = 0;
  for (Eigen::Index i = 0; i < H.rows(); ++i) q += (H(i, 0) < 0.5 && H(i, 1) < 0.5) ? 1 : 0;
  CHECK(std::abs(q - 128) <= 4);
}

TEST_CASE("ReplicatedDesign validation") {
  ReplicatedDesign d{DesignMatrix::Constant(2, 2, 0.5), {1, 0}};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.replicates = {1, 2};
  CHECK_NOTHROW(d.validate());
}
