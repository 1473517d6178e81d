#include "pieceflow/confidence.hpp"

#include <cmath>
#include <stdexcept>

namespace pieceflow {

namespace {

void check_span(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(want) +
                                " entries, got " + std::to_string(got));
  }
}

std::vector<std::uint8_t> gate(const PointCloud& region,
                               std::span<const Vec3> forward_flow,
                               std::span<const Vec3> warped,
                               std::span<const Vec3> backward_at_match,
                               std::span<const Vec3> target_at_match,
                               double beta1,
                               double beta2) {
  const std::size_t n = region.size();
  check_span(forward_flow.size(), n, "forward flow");
  check_span(warped.size(), n, "warped points");
  check_span(backward_at_match.size(), n, "backward flow at match");
  check_span(target_at_match.size(), n, "target points at match");
  std::vector<std::uint8_t> validity(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool consistent = (forward_flow[i] + backward_at_match[i]).norm() < beta1;
    const bool close = (warped[i] - target_at_match[i]).norm() < beta2;
    validity[i] = (consistent && close) ? 1 : 0;
  }
  return validity;
}

}  // namespace

std::vector<std::size_t> init_mapping(const PointCloud& region,
                                      std::span<const Vec3> forward_flow,
                                      const NeighborIndex& target_index) {
  check_span(forward_flow.size(), region.size(), "forward flow");
  std::vector<std::size_t> mapping(region.size());
  for (std::size_t i = 0; i < region.size(); ++i) {
    mapping[i] = target_index.nearest(region[i] + forward_flow[i]).index;
  }
  return mapping;
}

std::vector<std::uint8_t> init_validity(const PointCloud& region,
                                        std::span<const Vec3> forward_flow,
                                        std::span<const Vec3> backward_at_match,
                                        std::span<const Vec3> target_at_match,
                                        double beta1,
                                        double beta2) {
  check_span(forward_flow.size(), region.size(), "forward flow");
  std::vector<Vec3> warped;
  warped.reserve(region.size());
  for (std::size_t i = 0; i < region.size(); ++i) {
    warped.push_back(region[i] + forward_flow[i]);
  }
  return gate(region, forward_flow, warped, backward_at_match, target_at_match, beta1, beta2);
}

std::vector<double> confidence_scores(std::span<const Vec3> forward_flow,
                                      std::span<const Vec3> backward_at_match,
                                      double theta_sq) {
  check_span(backward_at_match.size(), forward_flow.size(), "backward flow at match");
  if (!(theta_sq > 0.0) || !std::isfinite(theta_sq)) {
    throw std::invalid_argument("confidence_scores: theta_sq must be positive and finite");
  }
  std::vector<double> scores(forward_flow.size());
  for (std::size_t i = 0; i < forward_flow.size(); ++i) {
    const double sq = (forward_flow[i] + backward_at_match[i]).squaredNorm();
    scores[i] = std::exp(-sq / (2.0 * theta_sq));
  }
  return scores;
}

std::vector<double> combine_weights(std::span<const double> scores,
                                    std::span<const std::uint8_t> validity) {
  check_span(validity.size(), scores.size(), "validity");
  std::vector<double> weights(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    weights[i] = validity[i] ? scores[i] : 0.0;
  }
  return weights;
}

std::vector<std::uint8_t> update_validity(const PointCloud& region,
                                          std::span<const Vec3> forward_flow,
                                          const RigidTransform& transform,
                                          std::span<const Vec3> backward_at_match,
                                          std::span<const Vec3> target_at_match,
                                          double beta1,
                                          double beta2) {
  std::vector<Vec3> warped;
  warped.reserve(region.size());
  for (const Vec3& p : region.points()) {
    warped.push_back(transform.apply(p));
  }
  return gate(region, forward_flow, warped, backward_at_match, target_at_match, beta1, beta2);
}

}  // namespace pieceflow
