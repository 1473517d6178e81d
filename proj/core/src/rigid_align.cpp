#include "pieceflow/rigid_align.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pieceflow {

namespace {

/// Relative bound deciding when the weighted source scatter is essentially
/// rank-1 (collinear or coincident support).
constexpr double kCollinearEigenRatio = 1e-12;

double floored(double w) { return w < kWeightFloor ? 0.0 : w; }

double total_weight(const CorrespondenceSet& c) {
  double sum = 0.0;
  for (const double w : c.weights) sum += floored(w);
  return sum;
}

std::pair<Vec3, Vec3> centroids_checked(const CorrespondenceSet& c, double w_sum) {
  Vec3 p = Vec3::Zero(), q = Vec3::Zero();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = floored(c.weights[i]);
    if (w == 0.0) continue;
    p += w * c.src[i];
    q += w * c.dst[i];
  }
  return {p / w_sum, q / w_sum};
}

}  // namespace

void CorrespondenceSet::validate() const {
  if (src.empty()) {
    throw std::invalid_argument("CorrespondenceSet: must contain at least one pair");
  }
  if (src.size() != dst.size() || src.size() != weights.size()) {
    throw std::invalid_argument("CorrespondenceSet: src/dst/weights sizes disagree");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!is_finite(src[i]) || !is_finite(dst[i])) {
      throw std::invalid_argument("CorrespondenceSet: non-finite point at pair " +
                                  std::to_string(i));
    }
    if (!(weights[i] >= 0.0 && weights[i] <= 1.0)) {
      throw std::invalid_argument("CorrespondenceSet: weight at pair " + std::to_string(i) +
                                  " outside [0, 1]");
    }
  }
}

std::pair<Vec3, Vec3> weighted_centroids(const CorrespondenceSet& c) {
  c.validate();
  const double w_sum = total_weight(c);
  if (w_sum <= 0.0) {
    throw std::invalid_argument("weighted_centroids: all weights are zero");
  }
  return centroids_checked(c, w_sum);
}

RigidTransform weighted_kabsch(const CorrespondenceSet& c) {
  c.validate();
  const double w_sum = total_weight(c);
  if (w_sum <= 0.0) {
    throw std::invalid_argument("weighted_kabsch: all weights are zero");
  }
  const auto [p_bar, q_bar] = centroids_checked(c, w_sum);

  std::size_t positive = 0;
  for (const double w : c.weights) {
    if (floored(w) > 0.0) ++positive;
  }
  if (positive < 3) {
    return RigidTransform(Mat3::Identity(), q_bar - p_bar);
  }

  // source scatter decides whether a rotation is identifiable
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = floored(c.weights[i]);
    if (w == 0.0) continue;
    const Vec3 dp = c.src[i] - p_bar;
    scatter += w * (dp * dp.transpose());
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 evals = eig.eigenvalues();  // ascending
  if (evals[1] <= kCollinearEigenRatio * std::max(evals[2], 0.0) || evals[2] <= 0.0) {
    return RigidTransform(Mat3::Identity(), q_bar - p_bar);
  }

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = floored(c.weights[i]);
    if (w == 0.0) continue;
    cross += w * ((c.src[i] - p_bar) * (c.dst[i] - q_bar).transpose());
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  const double det_sign = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 rot = v * Vec3(1.0, 1.0, det_sign).asDiagonal() * u.transpose();

  // re-orthonormalize against accumulated roundoff before the SO(3) gate
  Eigen::JacobiSVD<Mat3> polish(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
  rot = polish.matrixU() * polish.matrixV().transpose();

  return RigidTransform(rot, q_bar - rot * p_bar);
}

double weighted_alignment_error(const CorrespondenceSet& c, const RigidTransform& t) {
  c.validate();
  double err = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = floored(c.weights[i]);
    if (w == 0.0) continue;
    err += w * (t.apply(c.src[i]) - c.dst[i]).squaredNorm();
  }
  return err;
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  const FlowField flow = rigid_flow(t, cloud);
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.push_back(cloud[i] + flow[i]);
  }
  return PointCloud(std::move(out), cloud.frame_id());
}

FlowField rigid_flow(const RigidTransform& t, const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud.points()) {
    out.push_back(t.apply(p) - p);
  }
  return FlowField(std::move(out));
}

}  // namespace pieceflow
