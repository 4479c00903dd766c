#include <doctest.h>

#include <algorithm>

#include "hmrf_icp/benchmark.hpp"
#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/synth.hpp"
#include "oracles.hpp"

using namespace hmrf_icp;

namespace {

SceneParams at_overlap(double target) {
  SceneParams p;
  p.target_overlap = target;
  return p;
}

}  // namespace

TEST_CASE("default intrinsics") {
  const CameraIntrinsics k = SceneParams::default_intrinsics(80, 60);
  CHECK(k.width == 80);
  CHECK(k.height == 60);
  CHECK(k.cx == 39.5);
  CHECK(k.cy == 29.5);
  CHECK(k.fx == k.fy);
  CHECK(2 * std::atan(40 / k.fx) == doctest::Approx(M_PI / 3));
}

TEST_CASE("scene parameter validation") {
  CHECK_THROWS_AS(generate_scene(at_overlap(0.0), 1), InputError);
  CHECK_THROWS_AS(generate_scene(at_overlap(0.04), 1), InputError);
  CHECK_THROWS_AS(generate_scene(at_overlap(1.2), 1), InputError);
  SceneParams p;
  p.noise_sigma = -1;
  CHECK_THROWS_AS(generate_scene(p, 1), InputError);
  p = SceneParams{};
  p.min_objects = 5;
  p.max_objects = 4;
  CHECK_THROWS_AS(generate_scene(p, 1), InputError);
}

TEST_CASE("full overlap renders both views from one pose") {
  const ScenePair s = generate_scene(at_overlap(1.0), 3);
  CHECK((s.gt.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s.overlap == 1.0);
  CHECK(s.free.width == 80);
  CHECK(s.free.height == 60);
  CHECK(s.free.valid_count() > 1000);
}

TEST_CASE("low overlap target seed 42") {
  const ScenePair s = generate_scene(at_overlap(0.36), 42);
  CHECK(s.overlap >= 0.31);
  CHECK(s.overlap <= 0.41);
  CHECK(s.overlap == estimate_overlap(s.free, s.fixed, s.gt));
  CHECK(s.seed == 42);
  CHECK(s.scene_diameter > 0);
}

TEST_CASE("realized overlap tracks the target") {
  for (double target : {0.2, 0.45, 0.7, 0.9}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      CAPTURE(target);
      CAPTURE(seed);
      ScenePair s;
      try {
        s = generate_scene(at_overlap(target), seed);
      } catch (const GenerationError&) {
        continue;  // allowed for unreachable targets
      }
      CHECK(std::abs(s.overlap - target) <= 0.05);
      CHECK(std::abs(s.overlap - estimate_overlap(s.free, s.fixed, s.gt)) <= 0.02);
    }
  }
}

TEST_CASE("overlap decreases along the offset trace") {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const ScenePair s = generate_scene(at_overlap(0.4), seed);
    auto trace = s.offset_trace;
    std::sort(trace.begin(), trace.end());
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].second <= trace[i - 1].second);
  }
}

TEST_CASE("generation is reproducible") {
  const ScenePair a = generate_scene(at_overlap(0.6), 99);
  const ScenePair b = generate_scene(at_overlap(0.6), 99);
  CHECK(a.free.points == b.free.points);
  CHECK(a.free.valid == b.free.valid);
  CHECK(a.fixed.points == b.fixed.points);
  CHECK(a.gt == b.gt);
  CHECK(a.overlap == b.overlap);
  const ScenePair c = generate_scene(at_overlap(0.6), 100);
  CHECK(c.fixed.points != a.fixed.points);
}

TEST_CASE("noise follows the configured sigma") {
  SceneParams clean = at_overlap(1.0);
  clean.noise_sigma = 0.0;
  const ScenePair a = generate_scene(clean, 5);
  const ScenePair b = generate_scene(at_overlap(1.0), 5);
  std::vector<double> dz;
  for (std::size_t i = 0; i < a.fixed_depth.size(); ++i)
    if (a.fixed_depth.valid[i] && b.fixed_depth.valid[i]) dz.push_back(b.fixed_depth.depth[i] - a.fixed_depth.depth[i]);
  REQUIRE(dz.size() > 1000);
  CHECK(std::abs(oracle::mean(dz)) < 2e-4);
  CHECK(oracle::pop_std(dz) == doctest::Approx(0.002).epsilon(0.05));
}

TEST_CASE("perturbation axes") {
  const auto a = perturbation_axes(16, 7);
  REQUIRE(a.size() == 16);
  for (const auto& v : a) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  CHECK(perturbation_axes(16, 7) == a);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& v : perturbation_axes(1000, 8)) sum += v;
  CHECK((sum / 1000).norm() < 0.1);
  CHECK_THROWS_AS(perturbation_axes(0, 1), InputError);
}

TEST_CASE("benchmark records") {
  const ScenePair clean = [] {
    SceneParams p = at_overlap(1.0);
    p.noise_sigma = 0.0;
    return generate_scene(p, 11);
  }();
  const auto axes = perturbation_axes(2, 3);

  SUBCASE("one record per scene and axis, one entry per strategy") {
    const auto recs = run_benchmark({clean}, default_strategies(), {axes[0]});
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].outcomes.size() == 6);
    CHECK(recs[0].find("hmrf") != nullptr);
    CHECK(recs[0].find("nope") == nullptr);
    CHECK(recs[0].overlap == clean.overlap);
  }
  SUBCASE("a noiseless full-overlap scene is recovered by every strategy") {
    const auto recs = run_benchmark({clean}, default_strategies(), {axes[0]}, 0.02);
    for (const auto& o : recs[0].outcomes) {
      CAPTURE(o.strategy);
      CHECK(!o.failed);
      CHECK(o.t_err < 1e-6);
      CHECK(o.r_err < 1e-6);
    }
  }
  SUBCASE("record order and strategy-order independence") {
    const ScenePair other = generate_scene(at_overlap(0.8), 12);
    const std::vector<RejectionStrategy> fwd{strategy::All{}, strategy::X84{}};
    const std::vector<RejectionStrategy> rev{strategy::X84{}, strategy::All{}};
    const auto a = run_benchmark({clean, other}, fwd, axes);
    const auto b = run_benchmark({clean, other}, rev, axes);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].scene == i / 2);
      CHECK(a[i].axis == i % 2);
      for (const char* name : {"all", "x84"}) {
        CHECK(a[i].find(name)->t_err == b[i].find(name)->t_err);
        CHECK(a[i].find(name)->iterations == b[i].find(name)->iterations);
      }
    }
  }
  SUBCASE("empty inputs") { CHECK_THROWS_AS(run_benchmark({}, default_strategies(), axes), InputError); }
}

TEST_CASE("stratified scene parameters") {
  const auto set = stratified_scene_params(5, 3, 1);
  CHECK(set.size() == 35);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double lo = 0.3 + 0.1 * static_cast<double>(i / 5);
    CHECK(set[i].first.target_overlap >= lo);
    CHECK(set[i].first.target_overlap <= lo + 0.1);
  }
  CHECK(stratified_scene_params(5, 3, 1)[7].second == set[7].second);
  CHECK_THROWS_AS(stratified_scene_params(0, 3, 1), InputError);
}
