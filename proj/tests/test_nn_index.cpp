#include <doctest.h>

#include <random>

#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/nn_index.hpp"
#include "oracles.hpp"

using namespace hmrf_icp;

TEST_CASE("build_index rejects empty and non-finite clouds") {
  CHECK_THROWS_AS(build_index(FixedCloud{}), InputError);
  CHECK_THROWS_AS(build_index(FixedCloud{{Point3(0, 0, NAN)}}), InputError);
}

TEST_CASE("single-point index answers that point") {
  const NNIndex index = build_index(FixedCloud{{Point3(1, 2, 3)}});
  const Neighbor n = index.nearest(Point3(-5, 4, 0));
  CHECK(n.index == 0);
  CHECK(n.distance == doctest::Approx(std::sqrt(36.0 + 4 + 9)));
  CHECK(index.nearest(Point3(1, 2, 3), 0).distance == std::numeric_limits<double>::infinity());
}

TEST_CASE("exact hits and ties") {
  const FixedCloud cloud{{Point3(1, 0, 0), Point3(-1, 0, 0), Point3(0, 5, 0), Point3(1, 0, 0)}};
  const NNIndex index(cloud);
  SUBCASE("query on an indexed point") {
    const Neighbor n = index.nearest(Point3(0, 5, 0));
    CHECK(n.index == 2);
    CHECK(n.distance == 0.0);
  }
  SUBCASE("equidistant query takes the lower index") {
    CHECK(index.nearest(Point3(0, 0, 0)).index == 0);
    CHECK(index.nearest(Point3(0, 0, 7)).index == 0);
  }
  SUBCASE("duplicates resolve to the first copy") { CHECK(index.nearest(Point3(1, 0, 0)).index == 0); }
  SUBCASE("exclusion skips one slot") {
    const Neighbor n = index.nearest(Point3(1, 0, 0), 0);
    CHECK(n.index == 3);
    CHECK(n.distance == 0.0);
  }
}

TEST_CASE("index matches a linear scan on random clouds") {
  std::mt19937_64 rng(21);
  const auto pts = oracle::random_points(rng, 1000);
  const NNIndex index(pts);
  for (const auto& q : oracle::random_points(rng, 1000, 1.3)) {
    const auto expect = oracle::brute_nearest(pts, q);
    const Neighbor got = index.nearest(q);
    CHECK(got.index == expect.index);
    CHECK(got.distance == expect.distance);
  }
}

TEST_CASE("index matches a linear scan on lattices full of ties") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = oracle::grid_points(rng, 300, 3);
    const NNIndex index(pts);
    std::uniform_int_distribution<int> half(0, 12);
    for (int i = 0; i < 300; ++i) {
      const Point3 q(0.5 * half(rng) - 1, 0.5 * half(rng) - 1, 0.5 * half(rng) - 1);
      const auto expect = oracle::brute_nearest(pts, q);
      const Neighbor got = index.nearest(q);
      CHECK(got.index == expect.index);
      CHECK(got.distance == expect.distance);
    }
  }
}

TEST_CASE("repeated builds give identical answers") {
  std::mt19937_64 rng(23);
  const auto pts = oracle::random_points(rng, 500);
  const NNIndex a(pts), b(pts);
  for (const auto& q : oracle::random_points(rng, 200)) {
    CHECK(a.nearest(q).index == b.nearest(q).index);
    CHECK(a.nearest(q).distance == b.nearest(q).distance);
  }
}

TEST_CASE("batch_nearest") {
  std::mt19937_64 rng(24);
  FixedCloud fixed{oracle::random_points(rng, 400)};
  const NNIndex index = build_index(fixed);

  SUBCASE("free equal to fixed gives zero distances") {
    const StructuredCloud free = to_structured(fixed);
    const Correspondences c = batch_nearest(index, free);
    REQUIRE(c.size() == fixed.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c.distances[i] == 0.0);
      CHECK(c.indices[i] == i);
    }
  }
  SUBCASE("single valid pixel") {
    StructuredCloud free(4, 4);
    free.points[9] = Point3(0.1, 0.2, 0.3);
    free.valid[9] = 1;
    const Correspondences c = batch_nearest(index, free);
    REQUIRE(c.size() == 1);
    CHECK(c.pixels[0] == 9);
  }
  SUBCASE("elementwise equal to sequential queries") {
    StructuredCloud free(30, 20);
    const auto pts = oracle::random_points(rng, free.size(), 1.2);
    for (std::size_t i = 0; i < free.size(); ++i) {
      free.points[i] = pts[i];
      free.valid[i] = (i % 3) != 1;
    }
    const Correspondences c = batch_nearest(index, free);
    CHECK(c.size() == free.valid_count());
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k > 0) CHECK(c.pixels[k] > c.pixels[k - 1]);
      const Neighbor n = index.nearest(free.points[c.pixels[k]]);
      CHECK(c.indices[k] == n.index);
      CHECK(c.distances[k] == n.distance);
      CHECK(std::abs(c.distances[k] - (free.points[c.pixels[k]] - fixed.points[c.indices[k]]).norm()) < 1e-12);
    }
  }
}

TEST_CASE("median_nn_spacing") {
  std::vector<Point3> line;
  for (int i = 0; i < 5; ++i) line.emplace_back(0.25 * i, 0, 0);
  CHECK(median_nn_spacing(line) == doctest::Approx(0.25));
  CHECK(median_nn_spacing(std::vector<Point3>{Point3(1, 1, 1)}) == 0.0);
}
