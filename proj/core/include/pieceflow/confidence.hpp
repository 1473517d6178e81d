#pragma once

#include "pieceflow/nn_search.hpp"
#include "pieceflow/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pieceflow {

/// All functions here operate on one region of the source cloud. Spans must
/// be aligned with the region's points; gathered spans (backward flow /
/// target position at the current match) must be aligned too. Size
/// mismatches throw std::invalid_argument.

/// Initial correspondence: nearest target to each flow-warped source point
/// p_i + f_i.
std::vector<std::size_t> init_mapping(const PointCloud& region,
                                      std::span<const Vec3> forward_flow,
                                      const NeighborIndex& target_index);

/// Hard validity gate from two strict tests: forward/backward consistency
/// |f_i + b_{m_i}| < beta1 and warp proximity |p_i + f_i - q_{m_i}| < beta2.
std::vector<std::uint8_t> init_validity(const PointCloud& region,
                                        std::span<const Vec3> forward_flow,
                                        std::span<const Vec3> backward_at_match,
                                        std::span<const Vec3> target_at_match,
                                        double beta1, double beta2);

/// Soft agreement score exp(-|f_i + b_{m_i}|^2 / (2 theta_sq)), in (0, 1].
std::vector<double> confidence_scores(std::span<const Vec3> forward_flow,
                                      std::span<const Vec3> backward_at_match,
                                      double theta_sq);

/// Elementwise product score * validity; invalid points get exactly 0.
std::vector<double> combine_weights(std::span<const double> scores,
                                    std::span<const std::uint8_t> validity);

/// Validity refresh after a transform update: same two gates, but the
/// proximity test uses the rigid warp R p_i + t instead of p_i + f_i.
std::vector<std::uint8_t> update_validity(const PointCloud& region,
                                          std::span<const Vec3> forward_flow,
                                          const RigidTransform& transform,
                                          std::span<const Vec3> backward_at_match,
                                          std::span<const Vec3> target_at_match,
                                          double beta1, double beta2);

}  // namespace pieceflow
