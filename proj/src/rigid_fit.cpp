#include "hmrf_icp/rigid_fit.hpp"

#include <algorithm>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "hmrf_icp/errors.hpp"

namespace hmrf_icp {

std::size_t InlierSelection::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

RigidTransform fit_rigid(std::span<const Point3> source, std::span<const Point3> target) {
  if (source.size() != target.size()) throw ConfigError("fit_rigid: source and target sizes differ");
  if (source.size() < kMinInliers) throw DegenerateSelectionError("rigid fit needs at least 3 inlier pairs");

  const double n = static_cast<double>(source.size());
  Eigen::Vector3d source_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    source_mean += source[i];
    target_mean += target[i];
  }
  source_mean /= n;
  target_mean /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i)
    cov.noalias() += (source[i] - source_mean) * (target[i] - target_mean).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sv = svd.singularValues();
  // Rank 2 (coplanar) still determines the rotation; rank < 2 does not.
  if (!(sv[0] > 0) || sv[1] <= 1e-12 * sv[0])
    throw DegenerateGeometryError("inlier points are coincident or collinear");

  const Eigen::Matrix3d& u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if ((v * u.transpose()).determinant() < 0) v.col(2) *= -1.0;
  Eigen::Matrix3d r = v * u.transpose();
  if (orthonormality_drift(r) > RigidTransform::kOrthoTolerance) r = orthonormalize(r);

  return RigidTransform(r, target_mean - r * source_mean);
}

RigidTransform fit_rigid(const StructuredCloud& free, const FixedCloud& fixed, const Correspondences& corr,
                         const InlierSelection& sel) {
  if (sel.size() != corr.size()) throw ConfigError("inlier mask is not aligned with the correspondences");
  std::vector<Point3> source;
  std::vector<Point3> target;
  source.reserve(corr.size());
  target.reserve(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (!sel.mask[i]) continue;
    source.push_back(free.points[corr.pixels[i]]);
    target.push_back(fixed.points[corr.indices[i]]);
  }
  return fit_rigid(source, target);
}

}  // namespace hmrf_icp
