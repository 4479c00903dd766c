#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace hmrf_icp {

using Point3 = Eigen::Vector3d;

/// Rigid motion x -> R x + t with R a proper rotation.
///
/// The constructor rejects matrices that are not orthonormal with
/// determinant +1 to within kOrthoTolerance. Use nearest() to project an
/// approximate rotation onto SO(3) first.
class RigidTransform {
 public:
  static constexpr double kOrthoTolerance = 1e-9;

  RigidTransform();
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return RigidTransform(); }
  static RigidTransform from_translation(const Eigen::Vector3d& translation);
  /// Rotation of `angle` radians about the unit `axis` through the origin.
  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                        const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());
  /// Projects `rotation` onto the closest proper rotation (polar decomposition).
  static RigidTransform nearest(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
  /// Homogeneous 4x4; the last row must be (0 0 0 1) and the upper block a
  /// rotation to within `tolerance`, which is then re-orthonormalized.
  static RigidTransform from_matrix(const Eigen::Matrix4d& m, double tolerance = 1e-6);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  Eigen::Matrix4d matrix() const;

  bool operator==(const RigidTransform&) const = default;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) { return compose(a, b); }

/// Largest absolute entry of R^T R - I.
double orthonormality_drift(const Eigen::Matrix3d& r);
/// Closest rotation in the Frobenius sense, det forced to +1.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r);
/// Rotation angle in [0, pi].
double rotation_angle(const Eigen::Matrix3d& r);

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  /// Throws InputError when the invariants (positive focal lengths,
  /// principal point inside the image) do not hold.
  void validate() const;
};

/// Row-major depth image in meters; invalid pixels carry depth 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), depth(std::size_t(w) * h, 0.0), valid(std::size_t(w) * h, 0) {}

  std::size_t size() const { return depth.size(); }
};

/// Points generated from a pixel lattice. points[i] is meaningful only
/// where valid[i] is set.
struct StructuredCloud {
  int width = 0;
  int height = 0;
  std::vector<Point3> points;
  std::vector<std::uint8_t> valid;

  StructuredCloud() = default;
  StructuredCloud(int w, int h)
      : width(w), height(h), points(std::size_t(w) * h, Point3::Zero()), valid(std::size_t(w) * h, 0) {}

  std::size_t size() const { return points.size(); }
  std::size_t valid_count() const;
  std::vector<Point3> valid_points() const;
  Point3 centroid() const;
};

struct FixedCloud {
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Lattice cloud carrying every point as valid on a 1 x N row.
StructuredCloud to_structured(const FixedCloud& cloud);
FixedCloud to_fixed(const StructuredCloud& cloud);

/// Pinhole unprojection: (d (u - cx) / fx, d (v - cy) / fy, d).
StructuredCloud unproject(const DepthMap& map, const CameraIntrinsics& k);
/// Pixel coordinates and depth of a camera-frame point.
Eigen::Vector3d project(const Point3& p, const CameraIntrinsics& k);

StructuredCloud apply_transform(const RigidTransform& t, const StructuredCloud& cloud);
FixedCloud apply_transform(const RigidTransform& t, const FixedCloud& cloud);

/// ||translation(t * gt^-1)||
double translation_error(const RigidTransform& t, const RigidTransform& gt);
/// Angle of R_t R_gt^T in [0, pi].
double rotation_error(const RigidTransform& t, const RigidTransform& gt);

/// Rotates gt's output by `angle` about the line through `centroid` with
/// direction `axis`. `centroid` lives in the frame gt maps into.
RigidTransform perturb_pose(const RigidTransform& gt, const Eigen::Vector3d& axis, double angle,
                            const Point3& centroid);

inline constexpr double kOverlapSpacingFactor = 2.0;

/// Fraction of valid free points that, once mapped by gt, lie within
/// tau * (median nearest-neighbor spacing of the free cloud) of the fixed
/// cloud.
double estimate_overlap(const StructuredCloud& free, const FixedCloud& fixed, const RigidTransform& gt,
                        double tau = kOverlapSpacingFactor);

}  // namespace hmrf_icp
