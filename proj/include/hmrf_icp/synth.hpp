#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hmrf_icp/geometry.hpp"

namespace hmrf_icp {

/// Procedural room scene rendered by two pinhole cameras.
struct SceneParams {
  CameraIntrinsics intrinsics = default_intrinsics(80, 60);
  double target_overlap = 1.0;
  double noise_sigma = 0.002;  // meters, along the viewing ray
  double overlap_tolerance = 0.05;
  int min_objects = 3;
  int max_objects = 6;
  double scale = 1.0;  // multiplies every scene length (layout, objects, walls)

  /// ~60 degree horizontal field of view, principal point at the center.
  static CameraIntrinsics default_intrinsics(int width, int height);
  void validate() const;
};

struct ScenePair {
  StructuredCloud free;
  FixedCloud fixed;
  RigidTransform gt;  // maps the free camera frame onto the fixed one
  double overlap = 0.0;
  double scene_diameter = 0.0;
  std::uint64_t seed = 0;
  // Depth maps the clouds were unprojected from.
  DepthMap free_depth;
  DepthMap fixed_depth;
  // (pose offset, noiseless overlap) for every offset tried while solving
  // for the target overlap.
  std::vector<std::pair<double, double>> offset_trace;
};

/// Renders a deterministic scene for `seed` and solves for the free camera
/// offset that realizes params.target_overlap. Throws GenerationError when
/// the realized overlap misses the target by more than the tolerance.
ScenePair generate_scene(const SceneParams& params, std::uint64_t seed);

/// Seeded uniform directions on the unit sphere.
std::vector<Eigen::Vector3d> perturbation_axes(int count, std::uint64_t seed);

}  // namespace hmrf_icp
