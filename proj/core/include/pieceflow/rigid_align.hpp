#pragma once

#include "pieceflow/types.hpp"

#include <utility>
#include <vector>

namespace pieceflow {

/// Weights below this are treated as exactly zero everywhere in this module,
/// so zero-weight pairs can never perturb a result through roundoff.
inline constexpr double kWeightFloor = 1e-12;

/// Paired source/target points with per-pair weights in [0,1].
struct CorrespondenceSet {
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  std::vector<double> weights;

  std::size_t size() const noexcept { return src.size(); }
  /// Throws std::invalid_argument on size mismatch, empty set, weights
  /// outside [0,1], or non-finite entries.
  void validate() const;
};

/// Weighted means of src and dst. Throws when all weights are zero.
std::pair<Vec3, Vec3> weighted_centroids(const CorrespondenceSet& c);

/// Weighted least-squares rigid motion: minimizes sum_i w_i |R p_i + t - q_i|^2
/// over R in SO(3), t in R^3 (SVD of the weighted cross-covariance, with the
/// determinant-sign correction that excludes reflections). Degenerate inputs
/// (< 3 positively weighted pairs, or source scatter concentrated on a line)
/// fall back to pure translation between the weighted centroids.
RigidTransform weighted_kabsch(const CorrespondenceSet& c);

/// The objective weighted_kabsch minimizes, evaluated at `t`:
/// sum_i w_i |R p_i + t - q_i|^2 (floored weights).
double weighted_alignment_error(const CorrespondenceSet& c, const RigidTransform& t);

/// Whole-cloud warp. Defined as p + rigid_flow so that a warped cloud and
/// the displacement field agree bit for bit.
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// Displacement field of the warp: flow_i = (R p_i + t) - p_i.
FlowField rigid_flow(const RigidTransform& t, const PointCloud& cloud);

}  // namespace pieceflow
