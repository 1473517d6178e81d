#include "pieceflow/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pieceflow {

bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

PointCloud::PointCloud(std::vector<Vec3> points, std::string frame_id)
    : points_(std::move(points)), frame_id_(std::move(frame_id)) {
  if (points_.empty()) {
    throw std::invalid_argument("PointCloud: must contain at least one point");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!is_finite(points_[i])) {
      throw std::invalid_argument("PointCloud: non-finite coordinate at point " +
                                  std::to_string(i));
    }
  }
}

FlowField::FlowField(std::vector<Vec3> vectors) : vectors_(std::move(vectors)) {
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (!is_finite(vectors_[i])) {
      throw std::invalid_argument("FlowField: non-finite vector at index " + std::to_string(i));
    }
  }
}

FlowField FlowField::zeros(std::size_t count) {
  return FlowField(std::vector<Vec3>(count, Vec3::Zero()));
}

RigidTransform::RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.allFinite() || !is_finite(translation_)) {
    throw std::invalid_argument("RigidTransform: non-finite entries");
  }
  const double ortho_err = (rotation_.transpose() * rotation_ - Mat3::Identity()).norm();
  if (ortho_err > kOrthonormalTol) {
    throw std::invalid_argument("RigidTransform: rotation is not orthonormal (|R^T R - I| = " +
                                std::to_string(ortho_err) + ")");
  }
  const double det = rotation_.determinant();
  if (std::abs(det - 1.0) > kOrthonormalTol) {
    throw std::invalid_argument("RigidTransform: rotation must be proper (det = " +
                                std::to_string(det) + ")");
  }
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return RigidTransform(rt, -(rt * translation_));
}

SupervoxelPartition::SupervoxelPartition(std::vector<std::uint32_t> labels,
                                         std::uint32_t region_count)
    : labels_(std::move(labels)), region_count_(region_count) {
  if (region_count_ == 0) {
    throw std::invalid_argument("SupervoxelPartition: region_count must be >= 1");
  }
  if (labels_.empty()) {
    throw std::invalid_argument("SupervoxelPartition: labels must not be empty");
  }
  std::vector<bool> occupied(region_count_, false);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= region_count_) {
      throw std::invalid_argument("SupervoxelPartition: label " + std::to_string(labels_[i]) +
                                  " at index " + std::to_string(i) + " exceeds region count " +
                                  std::to_string(region_count_));
    }
    occupied[labels_[i]] = true;
  }
  for (std::uint32_t r = 0; r < region_count_; ++r) {
    if (!occupied[r]) {
      throw std::invalid_argument("SupervoxelPartition: region " + std::to_string(r) +
                                  " is empty");
    }
  }
}

void ConfidenceState::validate(std::size_t target_size) const {
  if (mapping.size() != weight.size() || mapping.size() != validity.size()) {
    throw std::invalid_argument("ConfidenceState: misaligned field sizes");
  }
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (mapping[i] >= target_size) {
      throw std::invalid_argument("ConfidenceState: mapping[" + std::to_string(i) +
                                  "] out of target range");
    }
    if (!(weight[i] >= 0.0 && weight[i] <= 1.0)) {
      throw std::invalid_argument("ConfidenceState: weight[" + std::to_string(i) +
                                  "] outside [0, 1]");
    }
    if (validity[i] != 0 && validity[i] != 1) {
      throw std::invalid_argument("ConfidenceState: validity[" + std::to_string(i) +
                                  "] must be 0 or 1");
    }
    if (validity[i] == 0 && weight[i] != 0.0) {
      throw std::invalid_argument("ConfidenceState: invalid point " + std::to_string(i) +
                                  " carries nonzero weight");
    }
  }
}

void PipelineConfig::validate() const {
  if (supervoxel_count == 0) {
    throw std::invalid_argument("PipelineConfig: supervoxel_count must be >= 1");
  }
  if (iterations == 0) {
    throw std::invalid_argument("PipelineConfig: iterations must be >= 1");
  }
  if (!(beta1 > 0.0) || !std::isfinite(beta1)) {
    throw std::invalid_argument("PipelineConfig: beta1 must be positive");
  }
  if (!(beta2 > 0.0) || !std::isfinite(beta2)) {
    throw std::invalid_argument("PipelineConfig: beta2 must be positive");
  }
  if (!(theta_sq > 0.0) || !std::isfinite(theta_sq)) {
    throw std::invalid_argument("PipelineConfig: theta_sq must be positive");
  }
  if (!(ransac.distance_threshold > 0.0) || !std::isfinite(ransac.distance_threshold)) {
    throw std::invalid_argument("PipelineConfig: ransac.distance_threshold must be positive");
  }
  if (ransac.max_iterations == 0) {
    throw std::invalid_argument("PipelineConfig: ransac.max_iterations must be >= 1");
  }
}

PipelineConfig PipelineConfig::scene_flow_profile() { return PipelineConfig{}; }

PipelineConfig PipelineConfig::motion_profile() {
  PipelineConfig cfg;
  cfg.supervoxel_count = 60;
  cfg.iterations = 2;
  cfg.beta1 = 3.0;
  cfg.beta2 = 1.0;
  cfg.theta_sq = 0.5;
  cfg.remove_ground = true;
  return cfg;
}

}  // namespace pieceflow
