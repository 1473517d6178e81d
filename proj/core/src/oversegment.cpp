#include "pieceflow/oversegment.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace pieceflow {

namespace {

constexpr int kMaxLloydIterations = 50;
constexpr double kCentroidShiftTol = 1e-6;  // meters

/// Farthest-point sampling. Deterministic: the first seed is index 0 and
/// ties on the max-min distance go to the lowest index.
std::vector<std::size_t> farthest_point_seeds(const std::vector<Vec3>& pts, std::uint32_t k) {
  std::vector<std::size_t> seeds;
  seeds.reserve(k);
  seeds.push_back(0);
  std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    const Vec3& last = pts[seeds.back()];
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d2 = (pts[i] - last).squaredNorm();
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    seeds.push_back(best);
  }
  return seeds;
}

}  // namespace

SupervoxelPartition segment(const PointCloud& cloud, std::uint32_t region_count,
                            std::uint64_t seed) {
  (void)seed;  // reserved; the geometric path is deterministic without it
  const std::size_t n = cloud.size();
  if (region_count == 0) {
    throw std::invalid_argument("segment: region_count must be >= 1");
  }
  if (region_count > n) {
    throw std::invalid_argument("segment: region_count " + std::to_string(region_count) +
                                " exceeds point count " + std::to_string(n));
  }

  const std::vector<Vec3>& pts = cloud.points();
  const std::uint32_t k = region_count;

  std::vector<Vec3> centroids;
  centroids.reserve(k);
  for (const std::size_t s : farthest_point_seeds(pts, k)) centroids.push_back(pts[s]);

  std::vector<std::uint32_t> labels(n, 0);
  std::vector<std::size_t> count(k, 0);

  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    // assignment: nearest centroid, ties to the lowest region index
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      double best_d2 = (pts[i] - centroids[0]).squaredNorm();
      for (std::uint32_t r = 1; r < k; ++r) {
        const double d2 = (pts[i] - centroids[r]).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = r;
        }
      }
      labels[i] = best;
      ++count[best];
    }

    // repair empty regions: split the largest region at its farthest member
    for (std::uint32_t empty = 0; empty < k; ++empty) {
      while (count[empty] == 0) {
        std::uint32_t largest = 0;
        for (std::uint32_t r = 1; r < k; ++r) {
          if (count[r] > count[largest]) largest = r;
        }
        std::size_t farthest = 0;
        double far_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (labels[i] != largest) continue;
          const double d2 = (pts[i] - centroids[largest]).squaredNorm();
          if (d2 > far_d2) {
            far_d2 = d2;
            farthest = i;
          }
        }
        labels[farthest] = empty;
        --count[largest];
        ++count[empty];
      }
    }

    // centroid update
    std::vector<Vec3> next(k, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) next[labels[i]] += pts[i];
    double max_shift = 0.0;
    for (std::uint32_t r = 0; r < k; ++r) {
      next[r] /= static_cast<double>(count[r]);
      max_shift = std::max(max_shift, (next[r] - centroids[r]).norm());
    }
    centroids.swap(next);
    if (max_shift < kCentroidShiftTol) break;
  }

  return SupervoxelPartition(std::move(labels), k);
}

RegionView region_points(const PointCloud& cloud, const SupervoxelPartition& partition,
                         std::uint32_t region) {
  if (partition.size() != cloud.size()) {
    throw std::invalid_argument("region_points: partition size " +
                                std::to_string(partition.size()) + " does not match cloud size " +
                                std::to_string(cloud.size()));
  }
  if (region >= partition.region_count()) {
    throw std::out_of_range("region_points: region " + std::to_string(region) +
                            " out of range [0, " + std::to_string(partition.region_count()) +
                            ")");
  }
  std::vector<Vec3> pts;
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (partition.labels()[i] == region) {
      pts.push_back(cloud[i]);
      indices.push_back(i);
    }
  }
  return RegionView{PointCloud(std::move(pts)), std::move(indices)};
}

}  // namespace pieceflow
