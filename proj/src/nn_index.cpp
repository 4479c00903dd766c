#include "hmrf_icp/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/rejection.hpp"

namespace hmrf_icp {

namespace {

constexpr std::uint32_t kLeafSize = 8;

}  // namespace

NNIndex::NNIndex(std::span<const Point3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw InputError("cannot index an empty cloud");
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) throw InputError("cloud too large to index");
  for (const auto& p : points_)
    if (!p.allFinite()) throw InputError("cloud contains non-finite coordinates");

  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t NNIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{0, 0.0, -1, -1, begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as one leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];

  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void NNIndex::search(std::int32_t id, const Point3& q, std::size_t exclude, std::size_t& best,
                     double& best_d2) const {
  const Node& node = nodes_[id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      if (idx == exclude) continue;
      const double d2 = squared_distance(q, points_[idx]);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right >= split. Equality on the plane
  // still has to be explored so the lowest index wins ties.
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff <= 0 ? node.left : node.right;
  const std::int32_t far = diff <= 0 ? node.right : node.left;
  search(near, q, exclude, best, best_d2);
  if (diff * diff <= best_d2) search(far, q, exclude, best, best_d2);
}

Neighbor NNIndex::nearest(const Point3& query, std::size_t exclude) const {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, query, exclude, best, best_d2);
  if (best == std::numeric_limits<std::size_t>::max()) return Neighbor{};
  return Neighbor{best, std::sqrt(best_d2)};
}

NNIndex build_index(const FixedCloud& fixed) { return NNIndex(fixed); }

Correspondences batch_nearest(const NNIndex& index, const StructuredCloud& free) {
  Correspondences corr;
  const std::size_t n = free.valid_count();
  corr.pixels.reserve(n);
  corr.indices.reserve(n);
  corr.distances.reserve(n);
  for (std::size_t i = 0; i < free.points.size(); ++i) {
    if (!free.valid[i]) continue;
    const Neighbor nb = index.nearest(free.points[i]);
    corr.pixels.push_back(i);
    corr.indices.push_back(nb.index);
    corr.distances.push_back(nb.distance);
  }
  return corr;
}

double median_nn_spacing(std::span<const Point3> points) {
  if (points.size() < 2) return 0.0;
  const NNIndex index(points);
  std::vector<double> spacing(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) spacing[i] = index.nearest(points[i], i).distance;
  return median(std::move(spacing));
}

}  // namespace hmrf_icp
