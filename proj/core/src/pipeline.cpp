#include "pieceflow/pipeline.hpp"

#include "pieceflow/confidence.hpp"
#include "pieceflow/io.hpp"
#include "pieceflow/nn_search.hpp"
#include "pieceflow/oversegment.hpp"
#include "pieceflow/rigid_align.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace pieceflow {

namespace {

/// Cap on repeated warm-up passes per region count in warmup_flow; each pass
/// restarts the alternation from the previous labels, so the cap bounds work
/// on scenes whose labels never reach an exact fixed point.
constexpr int kWarmupFixpointPasses = 8;

/// Region counts 1, 2, 4, ... ending exactly at the requested count.
std::vector<std::uint32_t> coarse_to_fine_schedule(std::uint32_t k) {
  std::vector<std::uint32_t> counts;
  for (std::uint64_t c = 1; c < k; c *= 2) counts.push_back(static_cast<std::uint32_t>(c));
  counts.push_back(k);
  return counts;
}

std::size_t active_count(const std::vector<double>& weights) {
  std::size_t n = 0;
  for (const double w : weights) {
    if (w >= kWeightFloor) ++n;
  }
  return n;
}

struct RegionSolution {
  RigidTransform transform;
  std::vector<Vec3> flow;
  std::vector<std::uint8_t> validity;
  std::vector<ObjectiveSample> trace;
};

/// Alternating refinement of one region: fit a confidence-weighted rigid
/// motion, re-match against the target, refresh validity and weights, repeat.
/// A region whose weights all vanish freezes at its last transform (identity
/// if that happens before the first fit) and emits no further trace records.
RegionSolution solve_region(const PointCloud& region, const std::vector<Vec3>& fwd,
                            const PointCloud& target, const FlowField& backward,
                            const NeighborIndex& target_index, const PipelineConfig& cfg) {
  const std::size_t n = region.size();
  std::vector<std::size_t> mapping = init_mapping(region, fwd, target_index);
  std::vector<Vec3> b_m(n), q_m(n);
  const auto gather = [&] {
    for (std::size_t j = 0; j < n; ++j) {
      b_m[j] = backward[mapping[j]];
      q_m[j] = target[mapping[j]];
    }
  };
  gather();

  std::vector<std::uint8_t> validity;
  std::vector<double> weights;
  if (cfg.warmup) {
    validity.assign(n, 1);
    weights.assign(n, 1.0);
  } else {
    validity = init_validity(region, fwd, b_m, q_m, cfg.beta1, cfg.beta2);
    weights = combine_weights(confidence_scores(fwd, b_m, cfg.theta_sq), validity);
  }

  RegionSolution sol;
  sol.trace.reserve(2 * cfg.iterations);
  for (std::uint32_t iter = 1; iter <= cfg.iterations; ++iter) {
    const std::size_t active = active_count(weights);
    if (active == 0) break;

    const CorrespondenceSet fit{region.points(), q_m, weights};
    sol.transform = weighted_kabsch(fit);
    sol.trace.push_back(ObjectiveSample{iter, UpdateStage::transform_update,
                                        weighted_alignment_error(fit, sol.transform), active});

    for (std::size_t j = 0; j < n; ++j) {
      mapping[j] = target_index.nearest(sol.transform.apply(region[j])).index;
    }
    gather();
    if (!cfg.warmup) {
      validity = update_validity(region, fwd, sol.transform, b_m, q_m, cfg.beta1, cfg.beta2);
      weights = combine_weights(confidence_scores(fwd, b_m, cfg.theta_sq), validity);
    }
    const CorrespondenceSet rematched{region.points(), q_m, weights};
    sol.trace.push_back(ObjectiveSample{iter, UpdateStage::mapping_update,
                                        weighted_alignment_error(rematched, sol.transform),
                                        active_count(weights)});
  }

  sol.flow = rigid_flow(sol.transform, region).vectors();
  sol.validity = std::move(validity);
  return sol;
}

/// Partition of the source with ground split off, plus which region ids the
/// solver should actually run on (the trailing ground region, if present, is
/// pinned instead of solved).
struct PartitionPlan {
  std::vector<std::uint32_t> labels;
  std::uint32_t region_count = 0;
  std::uint32_t solve_regions = 0;  // regions [0, solve_regions) get the solver
  bool has_ground = false;          // region id solve_regions is the ground
};

PartitionPlan plan_partition(const PointCloud& source, const PipelineConfig& cfg) {
  PartitionPlan plan;
  if (!cfg.remove_ground) {
    plan.labels = segment(source, cfg.supervoxel_count, cfg.seed).labels();
    plan.region_count = cfg.supervoxel_count;
    plan.solve_regions = cfg.supervoxel_count;
    return plan;
  }

  const GroundModel ground = fit_ground_plane(source, cfg.ransac, cfg.seed);
  std::vector<Vec3> rest;
  rest.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!ground.inlier_mask[i]) rest.push_back(source[i]);
  }

  plan.labels.assign(source.size(), 0);
  if (rest.empty()) {  // everything is ground: a single pinned region
    plan.region_count = 1;
    plan.solve_regions = 0;
    plan.has_ground = true;
    return plan;
  }

  // the region count is clamped, not an error, when ground removal leaves
  // fewer points than requested regions
  const std::uint32_t k = std::min(cfg.supervoxel_count,
                                   static_cast<std::uint32_t>(rest.size()));
  const SupervoxelPartition sub = segment(PointCloud(std::move(rest)), k, cfg.seed);
  plan.has_ground = sub.size() < source.size();
  plan.solve_regions = k;
  plan.region_count = k + (plan.has_ground ? 1u : 0u);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    plan.labels[i] = ground.inlier_mask[i] ? k : sub.labels()[pos++];
  }
  return plan;
}

/// Portable uniform draws: identical sequences on every platform, unlike
/// std::uniform_int_distribution.
class SeededDraws {
 public:
  explicit SeededDraws(std::uint64_t seed) : engine_(seed) {}

  std::size_t index(std::size_t n) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
  }

 private:
  std::mt19937_64 engine_;
};

std::size_t count_inliers(const PointCloud& cloud, const Vec3& normal, double offset,
                          double threshold, std::vector<std::uint8_t>* mask) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const bool in = std::abs(normal.dot(cloud[i]) + offset) <= threshold;
    if (mask) (*mask)[i] = in ? 1 : 0;
    count += in ? 1 : 0;
  }
  return count;
}

}  // namespace

PseudoLabelResult generate_pseudo_labels(const PointCloud& source, const PointCloud& target,
                                         const FlowField& forward, const FlowField& backward,
                                         const PipelineConfig& cfg, unsigned threads) {
  cfg.validate();
  if (forward.size() != source.size()) {
    throw std::invalid_argument("generate_pseudo_labels: forward flow has " +
                                std::to_string(forward.size()) + " vectors for " +
                                std::to_string(source.size()) + " source points");
  }
  if (backward.size() != target.size()) {
    throw std::invalid_argument("generate_pseudo_labels: backward flow has " +
                                std::to_string(backward.size()) + " vectors for " +
                                std::to_string(target.size()) + " target points");
  }

  PartitionPlan plan = plan_partition(source, cfg);
  SupervoxelPartition partition(std::move(plan.labels), plan.region_count);

  const NeighborIndex target_index(target);
  std::vector<RigidTransform> transforms(plan.region_count);
  std::vector<std::vector<ObjectiveSample>> traces(plan.region_count);
  std::vector<Vec3> out_flow(source.size(), Vec3::Zero());
  std::vector<std::uint8_t> out_valid(source.size(), 0);

  if (plan.has_ground) {  // pinned: identity transform, zero flow, trusted
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (partition.labels()[i] == plan.solve_regions) out_valid[i] = 1;
    }
  }

  std::atomic<std::uint32_t> next{0};
  std::vector<std::exception_ptr> errors;
  const auto work = [&](std::size_t worker) {
    while (true) {
      const std::uint32_t k = next.fetch_add(1);
      if (k >= plan.solve_regions) return;
      try {
        const RegionView view = region_points(source, partition, k);
        std::vector<Vec3> fwd;
        fwd.reserve(view.indices.size());
        for (const std::size_t i : view.indices) fwd.push_back(forward[i]);

        RegionSolution sol = solve_region(view.points, fwd, target, backward, target_index, cfg);
        transforms[k] = sol.transform;
        traces[k] = std::move(sol.trace);
        for (std::size_t j = 0; j < view.indices.size(); ++j) {
          out_flow[view.indices[j]] = sol.flow[j];
          out_valid[view.indices[j]] = sol.validity[j];
        }
      } catch (...) {
        if (!errors[worker]) errors[worker] = std::current_exception();
        return;
      }
    }
  };

  unsigned pool = threads != 0 ? threads : std::thread::hardware_concurrency();
  if (pool == 0) pool = 1;
  if (plan.solve_regions > 0) {
    pool = std::min<unsigned>(pool, plan.solve_regions);
    errors.resize(pool);
    if (pool == 1) {
      work(0);
    } else {
      std::vector<std::thread> workers;
      workers.reserve(pool);
      for (unsigned w = 0; w < pool; ++w) workers.emplace_back(work, w);
      for (std::thread& w : workers) w.join();
    }
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  return PseudoLabelResult{FlowField(std::move(out_flow)), std::move(out_valid),
                           std::move(transforms), std::move(partition), std::move(traces)};
}

PseudoLabelResult warmup_flow(const PointCloud& source, const PointCloud& target,
                              const PipelineConfig& cfg, unsigned threads) {
  cfg.validate();
  const FlowField no_backward = FlowField::zeros(target.size());
  FlowField flow = FlowField::zeros(source.size());
  std::optional<PseudoLabelResult> stage;
  for (std::uint32_t count : coarse_to_fine_schedule(cfg.supervoxel_count)) {
    PipelineConfig stage_cfg = cfg;
    stage_cfg.warmup = true;
    stage_cfg.supervoxel_count = count;
    for (int pass = 0; pass < kWarmupFixpointPasses; ++pass) {
      stage = generate_pseudo_labels(source, target, flow, no_backward, stage_cfg, threads);
      bool settled = true;
      for (std::size_t i = 0; i < flow.size() && settled; ++i) {
        settled = stage->labels[i].x() == flow[i].x() && stage->labels[i].y() == flow[i].y() &&
                  stage->labels[i].z() == flow[i].z();
      }
      flow = stage->labels;
      if (settled) break;
    }
  }
  return std::move(*stage);
}

BootstrapResult bootstrap_flow(const PointCloud& source, const PointCloud& target,
                               const PipelineConfig& cfg, unsigned threads) {
  cfg.validate();
  if (cfg.bootstrap_rounds == 0) {
    throw std::invalid_argument("bootstrap_flow: bootstrap_rounds must be >= 1");
  }

  PseudoLabelResult forward = warmup_flow(source, target, cfg, threads);
  if (cfg.bootstrap_rounds > 1) {
    FlowField bwd = warmup_flow(target, source, cfg, threads).labels;
    for (std::uint32_t round = 1; round < cfg.bootstrap_rounds; ++round) {
      PseudoLabelResult next =
          generate_pseudo_labels(source, target, forward.labels, bwd, cfg, threads);
      if (round + 1 < cfg.bootstrap_rounds) {  // the final backward pass is never consumed
        bwd = generate_pseudo_labels(target, source, bwd, next.labels, cfg, threads).labels;
      }
      forward = std::move(next);
    }
  }
  return BootstrapResult{std::move(forward.labels), std::move(forward.validity)};
}

GroundModel fit_ground_plane(const PointCloud& cloud, const RansacConfig& cfg,
                             std::uint64_t seed) {
  if (cloud.size() < 3) {
    throw std::invalid_argument("fit_ground_plane: need at least 3 points, got " +
                                std::to_string(cloud.size()));
  }
  if (!(cfg.distance_threshold > 0.0) || !std::isfinite(cfg.distance_threshold)) {
    throw std::invalid_argument("fit_ground_plane: distance_threshold must be positive");
  }
  if (cfg.max_iterations == 0) {
    throw std::invalid_argument("fit_ground_plane: max_iterations must be >= 1");
  }

  SeededDraws draws(seed);
  const std::size_t n = cloud.size();
  Vec3 best_normal = Vec3::Zero();
  double best_offset = 0.0;
  std::size_t best_count = 0;

  for (std::uint32_t it = 0; it < cfg.max_iterations; ++it) {
    std::size_t a = draws.index(n);
    std::size_t b = draws.index(n);
    std::size_t c = draws.index(n);
    for (int guard = 0; b == a && guard < 64; ++guard) b = draws.index(n);
    for (int guard = 0; (c == a || c == b) && guard < 64; ++guard) c = draws.index(n);
    if (b == a || c == a || c == b) continue;

    Vec3 normal = (cloud[b] - cloud[a]).cross(cloud[c] - cloud[a]);
    const double len = normal.norm();
    if (!(len > 1e-12)) continue;  // collinear sample
    normal /= len;
    const double offset = -normal.dot(cloud[a]);

    const std::size_t count =
        count_inliers(cloud, normal, offset, cfg.distance_threshold, nullptr);
    if (count > best_count) {  // strict: ties keep the earliest draw
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }
  if (best_count == 0) {
    throw std::runtime_error("fit_ground_plane: every sampled triple was degenerate");
  }

  // least-squares refit on the consensus set: plane through the centroid,
  // normal along the smallest principal direction
  Vec3 centroid = Vec3::Zero();
  std::size_t consensus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(best_normal.dot(cloud[i]) + best_offset) <= cfg.distance_threshold) {
      centroid += cloud[i];
      ++consensus;
    }
  }
  centroid /= static_cast<double>(consensus);
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(best_normal.dot(cloud[i]) + best_offset) <= cfg.distance_threshold) {
      const Vec3 d = cloud[i] - centroid;
      scatter += d * d.transpose();
    }
  }
  if (scatter.norm() > 0.0) {  // a degenerate (all-coincident) consensus keeps the sample
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    best_normal = eig.eigenvectors().col(0);  // ascending eigenvalues
    best_offset = -best_normal.dot(centroid);
  }

  // canonical orientation: the dominant component (z first, then y, then x)
  // points positive, so equivalent fits serialize identically
  const Vec3 a = best_normal.cwiseAbs();
  const double dominant = (a.z() >= a.y() && a.z() >= a.x()) ? best_normal.z()
                          : (a.y() >= a.x())                 ? best_normal.y()
                                                             : best_normal.x();
  if (dominant < 0.0) {
    best_normal = -best_normal;
    best_offset = -best_offset;
  }

  GroundModel model;
  model.normal = best_normal;
  model.offset = best_offset;
  model.inlier_mask.assign(n, 0);
  count_inliers(cloud, best_normal, best_offset, cfg.distance_threshold, &model.inlier_mask);
  return model;
}

double masked_flow_loss(const FlowField& predicted, const FlowField& labels,
                        std::span<const std::uint8_t> validity) {
  if (predicted.size() != labels.size()) {
    throw std::invalid_argument("masked_flow_loss: predicted and label sizes disagree");
  }
  if (validity.size() != labels.size()) {
    throw std::invalid_argument("masked_flow_loss: validity mask size disagrees with labels");
  }
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!validity[i]) continue;
    sum += (predicted[i] - labels[i]).norm();
    ++valid;
  }
  return valid == 0 ? 0.0 : sum / static_cast<double>(valid);
}

void write_trace_jsonl(const PseudoLabelResult& result, std::ostream& out) {
  for (std::size_t k = 0; k < result.objective_trace.size(); ++k) {
    for (const ObjectiveSample& s : result.objective_trace[k]) {
      out << "{\"region\":" << k << ",\"iter\":" << s.iteration << ",\"stage\":\""
          << (s.stage == UpdateStage::transform_update ? "transform" : "mapping")
          << "\",\"objective\":" << format_double(s.objective)
          << ",\"active_points\":" << s.active_points << "}\n";
    }
  }
}

}  // namespace pieceflow
