#include "pieceflow/nn_search.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pieceflow {

namespace {
constexpr std::uint32_t kLeafSize = 16;
}

NeighborIndex::NeighborIndex(const PointCloud& cloud) : points_(cloud.points()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
  const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) {
    return id;  // leaf (axis stays 3)
  }

  // split along the widest extent
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  const Vec3 extent = hi - lo;
  std::uint32_t axis = 0;
  if (extent.y() > extent[axis]) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  if (extent[axis] == 0.0) {
    return id;  // all points coincide: keep as one (possibly large) leaf
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis], cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });

  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NeighborIndex::search(std::int32_t node_id, const Vec3& query, Neighbor& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis == 3) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = (points_[idx] - query).squaredNorm();
      if (d2 < best.squared_distance ||
          (d2 == best.squared_distance && idx < best.index)) {
        best.squared_distance = d2;
        best.index = idx;
      }
    }
    return;
  }

  const double diff = query[node.axis] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search(near, query, best);
  // visit the far side on exact ties too, so equal-distance neighbors with
  // lower indices are never pruned away
  if (diff * diff <= best.squared_distance) {
    search(far, query, best);
  }
}

NeighborIndex::Neighbor NeighborIndex::nearest(const Vec3& query) const {
  if (!is_finite(query)) {
    throw std::invalid_argument("NeighborIndex: non-finite query point");
  }
  Neighbor best{points_.size(), std::numeric_limits<double>::infinity()};
  search(root_, query, best);
  return best;
}

}  // namespace pieceflow
