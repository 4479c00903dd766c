#include "hmrf_icp/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/nn_index.hpp"

namespace hmrf_icp {

double orthonormality_drift(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
  return u * v.transpose();
}

double rotation_angle(const Eigen::Matrix3d& r) {
  // atan2 form of arccos((tr - 1) / 2); keeps precision near 0 and pi.
  const double c = 0.5 * (r.trace() - 1.0);
  const Eigen::Vector3d skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * skew.norm();
  return std::clamp(std::atan2(s, c), 0.0, M_PI);
}

RigidTransform::RigidTransform()
    : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.allFinite() || !translation_.allFinite())
    throw InputError("rigid transform has non-finite entries");
  if (orthonormality_drift(rotation_) > kOrthoTolerance || std::abs(rotation_.determinant() - 1.0) > kOrthoTolerance)
    throw InputError("rigid transform rotation is not a proper rotation");
}

RigidTransform RigidTransform::from_translation(const Eigen::Vector3d& translation) {
  return RigidTransform(Eigen::Matrix3d::Identity(), translation);
}

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                               const Eigen::Vector3d& translation) {
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw InputError("rotation axis must be a unit vector");
  return RigidTransform(Eigen::AngleAxisd(angle, axis).toRotationMatrix(), translation);
}

RigidTransform RigidTransform::nearest(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  return RigidTransform(orthonormalize(rotation), translation);
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m, double tolerance) {
  if (!m.allFinite()) throw InputError("transform matrix has non-finite entries");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tolerance)
    throw InputError("transform matrix last row must be 0 0 0 1");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if (orthonormality_drift(r) > tolerance || std::abs(r.determinant() - 1.0) > tolerance)
    throw InputError("transform matrix rotation block is not a rotation");
  return nearest(r, m.topRightCorner<3, 1>());
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return RigidTransform(rt, -(rt * translation_));
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Eigen::Matrix3d r = a.rotation() * b.rotation();
  const Eigen::Vector3d t = a.rotation() * b.translation() + a.translation();
  if (orthonormality_drift(r) > RigidTransform::kOrthoTolerance) r = orthonormalize(r);
  return RigidTransform(r, t);
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw InputError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("image dimensions must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
    throw InputError("principal point must lie inside the image");
}

std::size_t StructuredCloud::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::vector<Point3> StructuredCloud::valid_points() const {
  std::vector<Point3> out;
  out.reserve(valid_count());
  for (std::size_t i = 0; i < points.size(); ++i)
    if (valid[i]) out.push_back(points[i]);
  return out;
}

Point3 StructuredCloud::centroid() const {
  Point3 sum = Point3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!valid[i]) continue;
    sum += points[i];
    ++n;
  }
  if (n == 0) throw InputError("centroid of a cloud without valid points");
  return sum / static_cast<double>(n);
}

StructuredCloud to_structured(const FixedCloud& cloud) {
  StructuredCloud out(static_cast<int>(cloud.size()), 1);
  out.points = cloud.points;
  std::fill(out.valid.begin(), out.valid.end(), std::uint8_t{1});
  return out;
}

FixedCloud to_fixed(const StructuredCloud& cloud) { return FixedCloud{cloud.valid_points()}; }

StructuredCloud unproject(const DepthMap& map, const CameraIntrinsics& k) {
  k.validate();
  if (map.width != k.width || map.height != k.height || map.size() != std::size_t(k.width) * k.height ||
      map.valid.size() != map.size())
    throw ConfigError("depth map dimensions do not match the camera intrinsics");

  StructuredCloud cloud(map.width, map.height);
  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      const std::size_t i = std::size_t(v) * map.width + u;
      const double d = map.depth[i];
      if (!map.valid[i] || !(d > 0) || !std::isfinite(d)) continue;
      cloud.points[i] = Point3(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
      cloud.valid[i] = 1;
    }
  }
  return cloud;
}

Eigen::Vector3d project(const Point3& p, const CameraIntrinsics& k) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy, p.z()};
}

StructuredCloud apply_transform(const RigidTransform& t, const StructuredCloud& cloud) {
  StructuredCloud out = cloud;
  for (std::size_t i = 0; i < out.points.size(); ++i)
    if (out.valid[i]) out.points[i] = t.apply(out.points[i]);
  return out;
}

FixedCloud apply_transform(const RigidTransform& t, const FixedCloud& cloud) {
  FixedCloud out = cloud;
  for (auto& p : out.points) p = t.apply(p);
  return out;
}

double translation_error(const RigidTransform& t, const RigidTransform& gt) {
  return compose(t, gt.inverse()).translation().norm();
}

double rotation_error(const RigidTransform& t, const RigidTransform& gt) {
  return rotation_angle(t.rotation() * gt.rotation().transpose());
}

RigidTransform perturb_pose(const RigidTransform& gt, const Eigen::Vector3d& axis, double angle,
                            const Point3& centroid) {
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw InputError("perturbation axis must be a unit vector");
  const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  const RigidTransform about_centroid(r, centroid - r * centroid);
  return compose(about_centroid, gt);
}

double estimate_overlap(const StructuredCloud& free, const FixedCloud& fixed, const RigidTransform& gt, double tau) {
  const std::vector<Point3> own = free.valid_points();
  if (own.empty() || fixed.empty()) throw InputError("overlap needs two non-empty clouds");
  const double threshold = tau * median_nn_spacing(own);
  const NNIndex index(fixed);
  std::size_t overlapping = 0;
  for (const auto& p : own)
    if (index.nearest(gt.apply(p)).distance <= threshold) ++overlapping;
  return static_cast<double>(overlapping) / static_cast<double>(own.size());
}

}  // namespace hmrf_icp
