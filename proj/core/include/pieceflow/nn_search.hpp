#pragma once

#include "pieceflow/types.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pieceflow {

/// Exact nearest-neighbor index over a fixed point cloud (kd-tree).
/// Distance ties are broken toward the lowest point index, so answers are
/// reproducible regardless of build order or thread count.
class NeighborIndex {
 public:
  struct Neighbor {
    std::size_t index;
    double squared_distance;
  };

  explicit NeighborIndex(const PointCloud& cloud);

  /// Exact nearest neighbor of `query`; throws std::invalid_argument on a
  /// non-finite query.
  Neighbor nearest(const Vec3& query) const;

  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(std::size_t i) const noexcept { return points_[i]; }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;    // leaf covers order_[begin, end)
    std::uint32_t axis = 3;   // 3 marks a leaf
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& query, Neighbor& best) const;

  std::vector<Vec3> points_;         // original order
  std::vector<std::uint32_t> order_; // permutation grouped by leaf
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace pieceflow
