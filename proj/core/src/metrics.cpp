#include "pieceflow/metrics.hpp"

#include <limits>
#include <stdexcept>

namespace pieceflow {

FlowMetrics evaluate(const FlowField& estimate,
                     const FlowField& truth,
                     std::span<const std::uint8_t> occluded) {
  if (estimate.size() != truth.size()) {
    throw std::invalid_argument("evaluate: estimate and truth sizes disagree");
  }
  if (!occluded.empty() && occluded.size() != truth.size()) {
    throw std::invalid_argument("evaluate: occlusion mask size disagrees with flows");
  }

  FlowMetrics m;
  double err_sum_full = 0.0;
  double err_sum = 0.0;
  std::size_t strict = 0, relaxed = 0, outlier = 0;

  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double err = (estimate[i] - truth[i]).norm();
    err_sum_full += err;
    if (!occluded.empty() && occluded[i] != 0) continue;

    const double mag = truth[i].norm();
    const double rel =
        mag == 0.0 ? std::numeric_limits<double>::infinity() : err / mag;
    err_sum += err;
    if (err < 0.05 || rel < 0.05) ++strict;
    if (err < 0.1 || rel < 0.1) ++relaxed;
    if (err > 0.3 || rel > 0.1) ++outlier;
    ++m.evaluated_points;
  }

  m.epe_full = truth.size() == 0 ? 0.0 : err_sum_full / static_cast<double>(truth.size());
  if (m.evaluated_points > 0) {
    const double n = static_cast<double>(m.evaluated_points);
    m.epe = err_sum / n;
    m.accuracy_strict_pct = 100.0 * static_cast<double>(strict) / n;
    m.accuracy_relaxed_pct = 100.0 * static_cast<double>(relaxed) / n;
    m.outlier_pct = 100.0 * static_cast<double>(outlier) / n;
  }
  return m;
}

}  // namespace pieceflow
