#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pieceflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// True iff all three coordinates are finite (no NaN, no infinity).
bool is_finite(const Vec3& v);

/// Immutable set of 3D points in meters. Never empty, never non-finite.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Vec3> points, std::string frame_id = {});

  const std::vector<Vec3>& points() const noexcept { return points_; }
  const Vec3& operator[](std::size_t i) const noexcept { return points_[i]; }
  std::size_t size() const noexcept { return points_.size(); }
  const std::string& frame_id() const noexcept { return frame_id_; }

 private:
  std::vector<Vec3> points_;
  std::string frame_id_;
};

/// Per-point 3D displacement vectors, aligned with some PointCloud by index.
class FlowField {
 public:
  explicit FlowField(std::vector<Vec3> vectors);
  static FlowField zeros(std::size_t count);

  const std::vector<Vec3>& vectors() const noexcept { return vectors_; }
  const Vec3& operator[](std::size_t i) const noexcept { return vectors_[i]; }
  std::size_t size() const noexcept { return vectors_.size(); }

 private:
  std::vector<Vec3> vectors_;
};

/// Proper rigid motion x -> R x + t with R in SO(3).
class RigidTransform {
 public:
  /// Orthonormality / determinant residual accepted at construction.
  static constexpr double kOrthonormalTol = 1e-9;

  RigidTransform();  // identity
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Assignment of every point to one of `region_count` regions.
/// Every region index in [0, region_count) is occupied.
class SupervoxelPartition {
 public:
  SupervoxelPartition(std::vector<std::uint32_t> labels, std::uint32_t region_count);

  const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }
  std::uint32_t region_count() const noexcept { return region_count_; }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::vector<std::uint32_t> labels_;
  std::uint32_t region_count_;
};

/// Per-point correspondence state carried across refinement iterations:
/// `mapping[i]` indexes the matched target point, `weight[i]` in [0,1] is the
/// soft confidence, `validity[i]` in {0,1} is the hard mask. Invalid points
/// must carry zero weight.
struct ConfidenceState {
  std::vector<std::size_t> mapping;
  std::vector<double> weight;
  std::vector<std::uint8_t> validity;

  /// Throws std::invalid_argument when sizes disagree, a mapping entry is
  /// >= target_size, a weight is outside [0,1], a validity flag is not 0/1,
  /// or an invalid point has nonzero weight.
  void validate(std::size_t target_size) const;
};

/// Parameters of the plane-fitting consensus search.
struct RansacConfig {
  double distance_threshold = 0.1;  // meters
  std::uint32_t max_iterations = 100;
};

/// Knobs of the pseudo-label pipeline. Defaults form the stereo-scene
/// profile; motion_profile() switches to the LiDAR odometry settings.
struct PipelineConfig {
  std::uint32_t supervoxel_count = 30;
  std::uint32_t iterations = 4;
  double beta1 = 0.2;       // meters, forward/backward consistency gate
  double beta2 = 0.1;       // meters, warp proximity gate
  double theta_sq = 0.005;  // squared meters, kernel bandwidth
  bool warmup = false;      // true: all weights and validity forced to 1
  std::uint32_t bootstrap_rounds = 2;
  std::uint64_t seed = 0;
  bool remove_ground = false;
  RansacConfig ransac;

  void validate() const;  // throws std::invalid_argument on bad values

  static PipelineConfig scene_flow_profile();
  static PipelineConfig motion_profile();
};

}  // namespace pieceflow
