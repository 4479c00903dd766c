#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hmrf_icp/icp.hpp"
#include "hmrf_icp/synth.hpp"

namespace hmrf_icp {

inline constexpr double kDefaultPerturbationAngle = 0.10471975511965977;  // pi / 30
inline constexpr int kDefaultAxisCount = 16;

struct StrategyOutcome {
  std::string strategy;
  double t_err = 0.0;
  double r_err = 0.0;
  int iterations = 0;
  double elapsed_seconds = 0.0;
  bool converged = false;
  bool failed = false;
  int initial_em_iterations = 0;
  int max_em_iterations_per_step = 0;
};

struct BenchmarkRecord {
  std::size_t scene = 0;
  std::size_t axis = 0;
  double overlap = 0.0;
  std::vector<StrategyOutcome> outcomes;  // in the order strategies were given

  const StrategyOutcome* find(const std::string& strategy) const;
};

/// Every (scene, axis, strategy) cell: t_init perturbs gt by `angle` about
/// the axis through the aligned free centroid. Records come back in
/// (scene, axis) order. Registration failures are recorded, not thrown.
std::vector<BenchmarkRecord> run_benchmark(const std::vector<ScenePair>& scenes,
                                           const std::vector<RejectionStrategy>& strategies,
                                           const std::vector<Eigen::Vector3d>& axes,
                                           double angle = kDefaultPerturbationAngle,
                                           const IcpConfig& base = IcpConfig{});

/// `per_decile` scene targets drawn uniformly from each overlap decile in
/// [first_decile / 10, 1.0], each with its own seed derived from `seed`.
std::vector<std::pair<SceneParams, std::uint64_t>> stratified_scene_params(int per_decile, int first_decile,
                                                                           std::uint64_t seed,
                                                                           const SceneParams& base = {});

}  // namespace hmrf_icp
