#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hmrf_icp/geometry.hpp"
#include "hmrf_icp/nn_index.hpp"

namespace hmrf_icp {

/// Inlier flags aligned with a Correspondences instance.
struct InlierSelection {
  std::vector<bool> mask;

  std::size_t size() const { return mask.size(); }
  std::size_t count() const;
};

inline constexpr std::size_t kMinInliers = 3;

/// Least-squares rigid motion taking source[i] onto target[i] (Arun / Umeyama
/// without scale). Throws DegenerateSelectionError for fewer than three pairs
/// and DegenerateGeometryError when the cross-covariance has rank below two.
RigidTransform fit_rigid(std::span<const Point3> source, std::span<const Point3> target);

/// Fits the selected pairs (free.points[pixels[i]], fixed.points[indices[i]]).
RigidTransform fit_rigid(const StructuredCloud& free, const FixedCloud& fixed, const Correspondences& corr,
                         const InlierSelection& sel);

}  // namespace hmrf_icp
