#include "hmrf_icp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include <Eigen/Geometry>

#include "hmrf_icp/errors.hpp"

namespace hmrf_icp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// World frame with z up: a ground plane, a back wall at y = kWallY and a
// side wall at x = +-kSideWallX (side chosen per seed).
constexpr double kWallY = 2.3;
constexpr double kSideWallX = 1.0;
constexpr double kMaxRange = 6.0;

constexpr double kMaxYaw = 70.0 * M_PI / 180.0;
constexpr double kMaxSlide = 0.6;        // meters along the camera's right axis
constexpr double kMinIncidence = 0.1;    // grazing rays produce no return
constexpr int kBisectionSteps = 30;

struct Hit {
  double t = kInf;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
};

struct Box {
  Eigen::Vector3d center;
  Eigen::Vector3d half;
  Eigen::Matrix3d rotation;  // box -> world
};

struct Sphere {
  Eigen::Vector3d center;
  double radius;
};

struct Scene {
  std::vector<Box> boxes;
  std::vector<Sphere> spheres;
  Eigen::Vector3d camera_position;
  Eigen::Vector3d camera_target;
  double turn_sign = 1.0;
  double side_wall = 1.0;
  double scale = 1.0;
};

void closest(Hit& best, double t, const Eigen::Vector3d& normal) {
  if (t > 1e-9 && t < best.t) {
    best.t = t;
    best.normal = normal;
  }
}

void hit_background(const Scene& scene, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& best) {
  if (d.z() < 0) closest(best, -o.z() / d.z(), Eigen::Vector3d::UnitZ());
  if (d.y() > 0) closest(best, (scene.scale * kWallY - o.y()) / d.y(), Eigen::Vector3d::UnitY());
  const double wall_x = scene.side_wall * scene.scale * kSideWallX;
  if (d.x() * scene.side_wall > 0) closest(best, (wall_x - o.x()) / d.x(), Eigen::Vector3d::UnitX());
}

void hit_box(const Box& box, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& best) {
  const Eigen::Vector3d lo = box.rotation.transpose() * (o - box.center);
  const Eigen::Vector3d ld = box.rotation.transpose() * d;
  double t_near = -kInf, t_far = kInf;
  int axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (ld[k] == 0.0) {
      if (std::abs(lo[k]) > box.half[k]) return;
      continue;
    }
    double t0 = (-box.half[k] - lo[k]) / ld[k];
    double t1 = (box.half[k] - lo[k]) / ld[k];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis = k;
    }
    t_far = std::min(t_far, t1);
  }
  if (axis < 0 || t_near > t_far || t_near <= 0) return;
  closest(best, t_near, box.rotation.col(axis));
}

void hit_sphere(const Sphere& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& best) {
  const Eigen::Vector3d oc = o - s.center;
  const double a = d.squaredNorm();
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0) return;
  const double t = (-b - std::sqrt(disc)) / a;
  if (t <= 0) return;
  closest(best, t, (oc + t * d) / s.radius);
}

Scene make_scene(const SceneParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  // Lengths below are for scale 1 and shrink with params.scale.
  auto length = [&](double lo, double hi) { return params.scale * uniform(lo, hi); };

  Scene scene;
  scene.scale = params.scale;
  const int count = params.min_objects +
                    static_cast<int>(std::floor(unit(rng) * (params.max_objects - params.min_objects + 1)));
  for (int i = 0; i < count; ++i) {
    const Eigen::Vector3d base(length(-0.6, 0.6), length(1.0, 1.9), 0.0);
    if (unit(rng) < 0.6) {
      Box box;
      box.half = Eigen::Vector3d(length(0.1, 0.3), length(0.1, 0.3), length(0.1, 0.35));
      box.center = base + Eigen::Vector3d(0, 0, box.half.z());
      box.rotation = Eigen::AngleAxisd(uniform(0.0, M_PI), Eigen::Vector3d::UnitZ()).toRotationMatrix();
      scene.boxes.push_back(box);
    } else {
      const double r = length(0.12, 0.3);
      scene.spheres.push_back(Sphere{base + Eigen::Vector3d(0, 0, r), r});
    }
  }
  scene.camera_position = Eigen::Vector3d(length(-0.2, 0.2), length(0.3, 0.5), length(0.8, 1.0));
  scene.camera_target = Eigen::Vector3d(length(-0.15, 0.15), length(1.4, 1.6), 0.0);
  scene.turn_sign = unit(rng) < 0.5 ? -1.0 : 1.0;
  scene.side_wall = unit(rng) < 0.5 ? -1.0 : 1.0;
  return scene;
}

// Camera-to-world pose: x right, y down, z along the viewing direction.
RigidTransform look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& forward_dir) {
  const Eigen::Vector3d f = forward_dir.normalized();
  const Eigen::Vector3d r = f.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = f.cross(r);
  Eigen::Matrix3d rot;
  rot << r, down, f;
  return RigidTransform::nearest(rot, position);
}

RigidTransform fixed_camera(const Scene& scene) {
  return look_at(scene.camera_position, scene.camera_target - scene.camera_position);
}

// Slides the camera sideways and turns it about the vertical by `offset`
// in [0, 1] of the maximum motion.
RigidTransform free_camera(const Scene& scene, double offset) {
  const RigidTransform base = fixed_camera(scene);
  const Eigen::Vector3d right = base.rotation().col(0);
  const Eigen::Vector3d forward = base.rotation().col(2);
  const double yaw = -scene.turn_sign * offset * kMaxYaw;
  const Eigen::Vector3d turned = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) * forward;
  return look_at(scene.camera_position + scene.turn_sign * offset * scene.scale * kMaxSlide * right, turned);
}

DepthMap render(const Scene& scene, const RigidTransform& cam_to_world, const CameraIntrinsics& k) {
  DepthMap map(k.width, k.height);
  const Eigen::Vector3d o = cam_to_world.translation();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d d = cam_to_world.rotation() * Eigen::Vector3d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      Hit best;
      hit_background(scene, o, d, best);
      for (const auto& b : scene.boxes) hit_box(b, o, d, best);
      for (const auto& s : scene.spheres) hit_sphere(s, o, d, best);
      if (!(best.t <= scene.scale * kMaxRange)) continue;
      if (std::abs(best.normal.dot(d.normalized())) < kMinIncidence) continue;
      const std::size_t i = std::size_t(v) * k.width + u;
      map.depth[i] = best.t;  // the camera-frame ray has unit z, so t is depth
      map.valid[i] = 1;
    }
  }
  return map;
}

void add_noise(DepthMap& map, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map.valid[i]) continue;
    const double d = map.depth[i] + noise(rng);
    if (d > 0) {
      map.depth[i] = d;
    } else {
      map.depth[i] = 0.0;
      map.valid[i] = 0;
    }
  }
}

double bounding_diagonal(const StructuredCloud& free, const FixedCloud& fixed, const RigidTransform& gt) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(kInf), hi = Eigen::Vector3d::Constant(-kInf);
  for (const auto& p : fixed.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (std::size_t i = 0; i < free.size(); ++i) {
    if (!free.valid[i]) continue;
    const Point3 p = gt.apply(free.points[i]);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace

CameraIntrinsics SceneParams::default_intrinsics(int width, int height) {
  const double f = 0.5 * width / std::tan(M_PI / 6.0);
  return CameraIntrinsics{f, f, 0.5 * (width - 1), 0.5 * (height - 1), width, height};
}

void SceneParams::validate() const {
  intrinsics.validate();
  if (!(target_overlap >= 0.05 && target_overlap <= 1.0)) throw InputError("target overlap must be in [0.05, 1]");
  if (!(noise_sigma >= 0)) throw InputError("noise sigma must be >= 0");
  if (!(overlap_tolerance > 0)) throw InputError("overlap tolerance must be positive");
  if (min_objects < 0 || max_objects < min_objects) throw InputError("invalid object count range");
  if (!(scale > 0)) throw InputError("scene scale must be positive");
}

ScenePair generate_scene(const SceneParams& params, std::uint64_t seed) {
  params.validate();
  const Scene scene = make_scene(params, seed);
  const CameraIntrinsics& k = params.intrinsics;
  const RigidTransform fixed_pose = fixed_camera(scene);
  const DepthMap fixed_clean = render(scene, fixed_pose, k);
  const FixedCloud fixed_cloud = to_fixed(unproject(fixed_clean, k));
  if (fixed_cloud.size() < 10) throw GenerationError("fixed view observes no surface");

  ScenePair pair;
  pair.seed = seed;

  auto overlap_at = [&](double offset) {
    const RigidTransform pose = free_camera(scene, offset);
    const StructuredCloud free = unproject(render(scene, pose, k), k);
    const double o = free.valid_count() < 2 ? 0.0 : estimate_overlap(free, fixed_cloud, fixed_pose.inverse() * pose);
    pair.offset_trace.emplace_back(offset, o);
    return o;
  };

  const double target = params.target_overlap;
  double offset = 0.0;
  if (overlap_at(0.0) > target) {
    double lo = 0.0, hi = 1.0;
    if (overlap_at(hi) > target + params.overlap_tolerance)
      throw GenerationError("target overlap is below what this scene can reach");
    double best_gap = kInf;
    for (int step = 0; step < kBisectionSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      const double o = overlap_at(mid);
      if (std::abs(o - target) < best_gap) {
        best_gap = std::abs(o - target);
        offset = mid;
      }
      if (best_gap < 0.25 * params.overlap_tolerance) break;
      (o > target ? lo : hi) = mid;
    }
  }

  const RigidTransform free_pose = free_camera(scene, offset);
  pair.gt = fixed_pose.inverse() * free_pose;
  pair.fixed_depth = fixed_clean;
  pair.free_depth = render(scene, free_pose, k);

  std::mt19937_64 fixed_noise(seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 free_noise(seed ^ 0xc2b2ae3d27d4eb4fULL);
  add_noise(pair.fixed_depth, params.noise_sigma, fixed_noise);
  add_noise(pair.free_depth, params.noise_sigma, free_noise);

  pair.fixed = to_fixed(unproject(pair.fixed_depth, k));
  pair.free = unproject(pair.free_depth, k);
  if (pair.free.valid_count() < 10 || pair.fixed.size() < 10) throw GenerationError("rendered views are empty");
  pair.overlap = estimate_overlap(pair.free, pair.fixed, pair.gt);
  if (std::abs(pair.overlap - target) > params.overlap_tolerance)
    throw GenerationError("realized overlap " + std::to_string(pair.overlap) + " misses target " +
                          std::to_string(target));
  pair.scene_diameter = bounding_diagonal(pair.free, pair.fixed, pair.gt);
  return pair;
}

std::vector<Eigen::Vector3d> perturbation_axes(int count, std::uint64_t seed) {
  if (count < 1) throw InputError("axis count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::Vector3d> axes;
  axes.reserve(static_cast<std::size_t>(count));
  while (axes.size() < static_cast<std::size_t>(count)) {
    const Eigen::Vector3d v(gauss(rng), gauss(rng), gauss(rng));
    const double n = v.norm();
    if (n < 1e-8) continue;
    axes.push_back(v / n);
  }
  return axes;
}

}  // namespace hmrf_icp
