#pragma once

#include "pieceflow/types.hpp"

#include <cstdint>
#include <vector>

namespace pieceflow {

/// Splits the cloud into `region_count` compact regions by farthest-point
/// seeding followed by Lloyd iterations on Euclidean coordinates. Every
/// region ends up non-empty; empty clusters are repaired by splitting the
/// largest cluster at its farthest member. Deterministic for a fixed
/// (cloud, region_count, seed); the geometric path is seed-free (the first
/// farthest-point seed is point 0), `seed` is reserved for future use.
/// Throws std::invalid_argument when region_count is 0 or exceeds the
/// number of points.
SupervoxelPartition segment(const PointCloud& cloud, std::uint32_t region_count,
                            std::uint64_t seed = 0);

/// Points of one region plus their indices in the original cloud,
/// in ascending index order.
struct RegionView {
  PointCloud points;
  std::vector<std::size_t> indices;
};

/// Throws std::out_of_range when `region` >= partition.region_count() and
/// std::invalid_argument when partition and cloud sizes disagree.
RegionView region_points(const PointCloud& cloud, const SupervoxelPartition& partition,
                         std::uint32_t region);

}  // namespace pieceflow
