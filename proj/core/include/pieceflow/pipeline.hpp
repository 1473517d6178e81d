#pragma once

#include "pieceflow/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace pieceflow {

enum class UpdateStage : std::uint8_t { transform_update = 0, mapping_update = 1 };

/// One objective reading of a region's refinement: the weighted alignment
/// error right after a transform update or right after the following
/// correspondence update. `active_points` counts pairs with nonzero weight.
struct ObjectiveSample {
  std::uint32_t iteration = 0;  // 1-based
  UpdateStage stage = UpdateStage::transform_update;
  double objective = 0.0;
  std::size_t active_points = 0;
};

/// Output of generate_pseudo_labels, all aligned with the source cloud.
struct PseudoLabelResult {
  FlowField labels;                       // per-point pseudo scene flow
  std::vector<std::uint8_t> validity;     // 1 = trust this label
  std::vector<RigidTransform> transforms; // one per region
  SupervoxelPartition partition;          // region of each source point
  std::vector<std::vector<ObjectiveSample>> objective_trace;  // per region
};

struct BootstrapResult {
  FlowField flow;
  std::vector<std::uint8_t> validity;
};

/// Plane n . p + offset = 0 with |n| = 1, plus the per-point inlier mask.
struct GroundModel {
  Vec3 normal = Vec3::Zero();
  double offset = 0.0;
  std::vector<std::uint8_t> inlier_mask;
};

/// Core routine: segments the source cloud into cfg.supervoxel_count regions
/// and fits one confidence-weighted rigid motion per region by alternating
/// correspondence, weight, and transform updates for exactly cfg.iterations
/// rounds, starting from the provided forward/backward flow estimates.
/// Labels inside a region are exactly the region transform's displacement.
/// `forward` must align with `source`, `backward` with `target`.
/// With cfg.remove_ground, ground inliers are split off into one extra
/// trailing region that keeps an identity transform, zero labels, and
/// validity 1. `threads` 0 means hardware concurrency; results are
/// byte-identical for any thread count.
PseudoLabelResult generate_pseudo_labels(const PointCloud& source, const PointCloud& target,
                                         const FlowField& forward, const FlowField& backward,
                                         const PipelineConfig& cfg, unsigned threads = 0);

/// Warm-up initializer used when no flow estimate exists yet: runs
/// generate_pseudo_labels in warmup mode (plain alternation, all weights 1)
/// through a coarse-to-fine region schedule 1, 2, 4, ... up to
/// cfg.supervoxel_count, feeding each stage's labels into the next stage's
/// correspondence initialization. Each stage repeats until its labels reach
/// a fixed point (at most 8 passes). The coarse stages let whole objects
/// lock on before fine regions refine, which avoids the local minima that
/// per-region alternation falls into when displacements rival region size.
/// Returns the final stage's result (full region count, validity all 1).
PseudoLabelResult warmup_flow(const PointCloud& source, const PointCloud& target,
                              const PipelineConfig& cfg, unsigned threads = 0);

/// Self-contained flow estimation: round 0 runs warmup_flow from zero flow
/// in both directions, later rounds feed each direction's labels back as
/// the other direction's flow estimate with the full confidence machinery
/// on. Runs cfg.bootstrap_rounds rounds (must be >= 1).
BootstrapResult bootstrap_flow(const PointCloud& source, const PointCloud& target,
                               const PipelineConfig& cfg, unsigned threads = 0);

/// Consensus plane fit: cfg.max_iterations seeded 3-point draws, inliers
/// within distance_threshold, then a least-squares refit on the best
/// consensus set (normal = smallest principal direction) and a final inlier
/// recount. Throws std::invalid_argument on clouds of fewer than 3 points
/// and std::runtime_error when every draw is degenerate.
GroundModel fit_ground_plane(const PointCloud& cloud, const RansacConfig& cfg,
                             std::uint64_t seed);

/// Mean Euclidean deviation between predicted flow and labels over valid
/// points: sum_i C_i |f_i - d_i| / sum_i C_i, and 0 when no point is valid.
double masked_flow_loss(const FlowField& predicted, const FlowField& labels,
                        std::span<const std::uint8_t> validity);

/// One JSON object per line: {"region":k,"iter":n,"stage":"transform"|
/// "mapping","objective":e,"active_points":a}.
void write_trace_jsonl(const PseudoLabelResult& result, std::ostream& out);

}  // namespace pieceflow
