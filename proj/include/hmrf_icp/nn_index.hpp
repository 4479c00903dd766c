#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "hmrf_icp/geometry.hpp"

namespace hmrf_icp {

struct Neighbor {
  std::size_t index = 0;
  double distance = std::numeric_limits<double>::infinity();
};

/// Exact nearest-neighbor k-d tree over a fixed point set.
///
/// Equidistant candidates resolve to the lowest point index, so answers are
/// identical to a linear scan that keeps the first minimum. Immutable after
/// construction; concurrent queries are safe.
class NNIndex {
 public:
  static constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();

  explicit NNIndex(std::span<const Point3> points);
  explicit NNIndex(const FixedCloud& cloud) : NNIndex(std::span<const Point3>(cloud.points)) {}

  std::size_t size() const { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[i]; }

  Neighbor nearest(const Point3& query) const { return nearest(query, kNoExclusion); }
  /// Nearest point other than the one stored at `exclude`. Returns an
  /// infinite distance when nothing else is indexed.
  Neighbor nearest(const Point3& query, std::size_t exclude) const;

 private:
  struct Node {
    // Leaf when left < 0; then [begin, end) indexes order_.
    int axis = 0;
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Point3& q, std::size_t exclude, std::size_t& best,
              double& best_d2) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Squared Euclidean distance with a fixed summation order (x, y, z).
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Nearest fixed point I_i and distance Y_i for every valid free pixel,
/// stored in increasing pixel order.
struct Correspondences {
  std::vector<std::size_t> pixels;
  std::vector<std::size_t> indices;
  std::vector<double> distances;

  std::size_t size() const { return distances.size(); }
  bool empty() const { return distances.empty(); }
};

/// Throws InputError on an empty cloud.
NNIndex build_index(const FixedCloud& fixed);

Correspondences batch_nearest(const NNIndex& index, const StructuredCloud& free);

/// Median over points of the distance to their nearest other point.
double median_nn_spacing(std::span<const Point3> points);

}  // namespace hmrf_icp
