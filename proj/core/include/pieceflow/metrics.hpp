#pragma once

#include "pieceflow/types.hpp"

#include <cstdint>
#include <span>

namespace pieceflow {

/// End-point-error statistics of an estimated flow against ground truth.
/// epe_full averages over every point; the remaining fields cover only
/// points not flagged occluded. Percentages are in [0, 100].
struct FlowMetrics {
  double epe_full = 0.0;
  double epe = 0.0;
  double accuracy_strict_pct = 0.0;   // error < 0.05 m or relative error < 5%
  double accuracy_relaxed_pct = 0.0;  // error < 0.10 m or relative error < 10%
  double outlier_pct = 0.0;           // error > 0.30 m or relative error > 10%
  std::size_t evaluated_points = 0;   // non-occluded count
};

/// Relative error is |f - d| / |d|, taken as +infinity when |d| = 0 so only
/// the absolute branch can admit such points. An empty `occluded` span means
/// nothing is occluded; otherwise 1 marks occluded points, which are
/// excluded from everything except epe_full. All comparisons are strict.
/// Sizes must agree (std::invalid_argument otherwise). With zero evaluated
/// points every statistic is 0.
FlowMetrics evaluate(const FlowField& estimate, const FlowField& truth,
                     std::span<const std::uint8_t> occluded = {});

}  // namespace pieceflow
