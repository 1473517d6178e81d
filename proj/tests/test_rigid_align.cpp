#include "pieceflow/rigid_align.hpp"

#include "support/synthetic.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <vector>

using namespace pieceflow;

namespace {

CorrespondenceSet make_set(std::vector<Vec3> src, std::vector<Vec3> dst, std::vector<double> w) {
  return CorrespondenceSet{std::move(src), std::move(dst), std::move(w)};
}

/// Exact correspondences under a known motion, with per-pair weights.
CorrespondenceSet exact_pairs(synth::Rng& rng, std::size_t n, const Mat3& rot, const Vec3& trans,
                              bool positive_weights) {
  CorrespondenceSet c;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = rng.in_box(Vec3::Zero(), 1.0);
    c.src.push_back(p);
    c.dst.push_back(rot * p + trans);
    c.weights.push_back(positive_weights ? rng.uniform(0.05, 1.0) : 1.0);
  }
  return c;
}

}  // namespace

TEST_CASE("weighted centroids: hand cases") {
  CorrespondenceSet c = make_set({Vec3(0, 0, 0), Vec3(2, 0, 0)},
                                 {Vec3(0, 1, 0), Vec3(2, 1, 0)}, {1.0, 1.0});
  auto [p, q] = weighted_centroids(c);
  CHECK(p == Vec3(1, 0, 0));
  CHECK(q == Vec3(1, 1, 0));

  c.weights = {1.0, 0.0};
  auto [p2, q2] = weighted_centroids(c);
  CHECK(p2 == Vec3(0, 0, 0));
  CHECK(q2 == Vec3(0, 1, 0));
}

TEST_CASE("weighted centroids match the direct-summation oracle") {
  synth::Rng rng(3);
  CorrespondenceSet c;
  for (int i = 0; i < 50; ++i) {
    c.src.push_back(rng.in_box(Vec3(1, 2, 3), 4.0));
    c.dst.push_back(rng.in_box(Vec3(-2, 0, 1), 4.0));
    c.weights.push_back(rng.uniform(0.0, 1.0));
  }
  auto [p, q] = weighted_centroids(c);
  auto [op, oq] = synth::centroids_oracle(c.src, c.dst, c.weights);
  CHECK((p - op).norm() < 1e-12);
  CHECK((q - oq).norm() < 1e-12);
}

TEST_CASE("all-zero weights are rejected") {
  CorrespondenceSet c = make_set({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                                 {Vec3(0, 0, 0), Vec3(1, 0, 0)}, {0.0, 0.0});
  CHECK_THROWS_AS(weighted_centroids(c), std::invalid_argument);
  CHECK_THROWS_AS(weighted_kabsch(c), std::invalid_argument);

  // weights under the floor count as zero
  c.weights = {1e-13, 1e-14};
  CHECK_THROWS_AS(weighted_kabsch(c), std::invalid_argument);
}

TEST_CASE("correspondence sets validate their shape") {
  CorrespondenceSet empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  CorrespondenceSet ragged = make_set({Vec3(0, 0, 0)}, {Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1.0});
  CHECK_THROWS_AS(ragged.validate(), std::invalid_argument);

  CorrespondenceSet bad_w = make_set({Vec3(0, 0, 0)}, {Vec3(0, 0, 0)}, {1.5});
  CHECK_THROWS_AS(bad_w.validate(), std::invalid_argument);
  bad_w.weights = {-0.1};
  CHECK_THROWS_AS(bad_w.validate(), std::invalid_argument);
}

TEST_CASE("pure translation is recovered") {
  CorrespondenceSet c;
  c.src = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  for (const Vec3& p : c.src) c.dst.push_back(p + Vec3(1, 0, 0));
  c.weights.assign(4, 1.0);

  RigidTransform t = weighted_kabsch(c);
  CHECK((t.rotation() - Mat3::Identity()).norm() < 1e-9);
  CHECK((t.translation() - Vec3(1, 0, 0)).norm() < 1e-9);
}

TEST_CASE("a 90 degree z-rotation is recovered") {
  Mat3 rot = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
  CorrespondenceSet c;
  c.src = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 0)};
  for (const Vec3& p : c.src) c.dst.push_back(rot * p);
  c.weights.assign(4, 1.0);

  RigidTransform t = weighted_kabsch(c);
  CHECK((t.rotation() - rot).norm() < 1e-9);
  CHECK(t.translation().norm() < 1e-9);
}

TEST_CASE("exact recovery under random motions and weights") {
  synth::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 rot = rng.rotation(0.5);
    const Vec3 trans = rng.in_box(Vec3::Zero(), 1.0);
    CorrespondenceSet c = exact_pairs(rng, 40, rot, trans, true);
    RigidTransform t = weighted_kabsch(c);
    CHECK((t.rotation() - rot).norm() < 1e-9);
    CHECK((t.translation() - trans).norm() < 1e-9);
  }
}

TEST_CASE("zero-weight pairs leave the answer bit-identical") {
  synth::Rng rng(7);
  const Mat3 rot = rng.rotation(0.4);
  const Vec3 trans(0.3, -0.2, 0.9);
  CorrespondenceSet clean = exact_pairs(rng, 25, rot, trans, true);
  RigidTransform t_clean = weighted_kabsch(clean);

  CorrespondenceSet noisy = clean;
  for (int i = 0; i < 10; ++i) {
    noisy.src.push_back(rng.in_box(Vec3::Zero(), 50.0));
    noisy.dst.push_back(rng.in_box(Vec3::Zero(), 50.0));
    noisy.weights.push_back(0.0);
  }
  // sub-floor weights must behave exactly like zero as well
  noisy.src.push_back(rng.in_box(Vec3::Zero(), 50.0));
  noisy.dst.push_back(rng.in_box(Vec3::Zero(), 50.0));
  noisy.weights.push_back(1e-13);

  RigidTransform t_noisy = weighted_kabsch(noisy);
  CHECK(t_noisy.rotation() == t_clean.rotation());
  CHECK(t_noisy.translation() == t_clean.translation());
}

TEST_CASE("returned motion is a weighted least-squares minimum") {
  synth::Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    // noisy correspondences so the optimum is strictly interior
    const Mat3 rot = rng.rotation(0.6);
    const Vec3 trans = rng.in_box(Vec3::Zero(), 1.0);
    CorrespondenceSet c;
    for (int i = 0; i < 30; ++i) {
      const Vec3 p = rng.in_box(Vec3::Zero(), 1.0);
      c.src.push_back(p);
      c.dst.push_back(rot * p + trans + rng.in_box(Vec3::Zero(), 0.05));
      c.weights.push_back(rng.uniform(0.1, 1.0));
    }
    RigidTransform best = weighted_kabsch(c);
    const double e_best = weighted_alignment_error(c, best);

    for (int k = 0; k < 100; ++k) {
      const Mat3 wobble = rng.rotation(1e-3);
      RigidTransform perturbed(wobble * best.rotation(),
                               best.translation() + 1e-3 * rng.unit_vector());
      CHECK(weighted_alignment_error(c, perturbed) >= e_best - 1e-12);
    }
  }
}

TEST_CASE("near-planar supports never produce reflections") {
  synth::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 rot = rng.rotation(0.8);
    const Vec3 trans = rng.in_box(Vec3::Zero(), 0.5);
    CorrespondenceSet c;
    for (int i = 0; i < 20; ++i) {
      Vec3 p = rng.in_box(Vec3::Zero(), 1.0);
      p.z() *= (trial % 2 == 0) ? 0.0 : 1e-7;  // exactly / nearly planar
      c.src.push_back(p);
      c.dst.push_back(rot * p + trans);
      c.weights.push_back(1.0);
    }
    RigidTransform t = weighted_kabsch(c);
    CHECK(t.rotation().determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((t.rotation() - rot).norm() < 1e-6);
  }
}

TEST_CASE("single dominant pair degrades to pure translation") {
  CorrespondenceSet c = make_set({Vec3(1, 2, 3)}, {Vec3(4, 5, 6)}, {1.0});
  RigidTransform t = weighted_kabsch(c);
  CHECK(t.rotation() == Mat3::Identity());
  CHECK(t.translation() == Vec3(3, 3, 3));
}

TEST_CASE("collinear support degrades to pure translation") {
  CorrespondenceSet c;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p(static_cast<double>(i), 0.0, 0.0);
    c.src.push_back(p);
    c.dst.push_back(p + Vec3(0, 2, 0));
    c.weights.push_back(1.0);
  }
  RigidTransform t = weighted_kabsch(c);
  CHECK(t.rotation() == Mat3::Identity());
  CHECK((t.translation() - Vec3(0, 2, 0)).norm() < 1e-12);
}

TEST_CASE("apply_transform and rigid_flow are consistent bit for bit") {
  synth::Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    RigidTransform t(rng.rotation(2.0), rng.in_box(Vec3::Zero(), 2.0));
    PointCloud cloud(synth::random_points(rng, 64, Vec3::Zero(), 3.0));
    PointCloud warped = apply_transform(t, cloud);
    FlowField flow = rigid_flow(t, cloud);
    REQUIRE(warped.size() == cloud.size());
    REQUIRE(flow.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 sum = cloud[i] + flow[i];
      CHECK(sum.x() == warped[i].x());
      CHECK(sum.y() == warped[i].y());
      CHECK(sum.z() == warped[i].z());
      // and both stay within roundoff of the direct warp
      CHECK((warped[i] - (t.rotation() * cloud[i] + t.translation())).norm() < 1e-12);
    }
  }
}

TEST_CASE("identity transform leaves a cloud unchanged and flow zero") {
  synth::Rng rng(15);
  PointCloud cloud(synth::random_points(rng, 32, Vec3(5, 5, 5), 2.0));
  RigidTransform id;
  PointCloud same = apply_transform(id, cloud);
  FlowField flow = rigid_flow(id, cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(same[i] == cloud[i]);
    CHECK(flow[i].norm() == 0.0);
  }
}

TEST_CASE("pure translation warp moves the origin onto t") {
  RigidTransform t(Mat3::Identity(), Vec3(0, 0, 1));
  PointCloud cloud({Vec3(0, 0, 0)});
  CHECK(apply_transform(t, cloud)[0] == Vec3(0, 0, 1));
  CHECK(rigid_flow(t, cloud)[0] == Vec3(0, 0, 1));
}

TEST_CASE("warping forward then backward returns the original points") {
  synth::Rng rng(17);
  RigidTransform t(rng.rotation(1.5), Vec3(0.4, -1.0, 2.0));
  PointCloud cloud(synth::random_points(rng, 40, Vec3::Zero(), 2.0));
  PointCloud round = apply_transform(t.inverse(), apply_transform(t, cloud));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((round[i] - cloud[i]).norm() < 1e-12);
  }
}

TEST_CASE("alignment error is the explicit weighted sum") {
  CorrespondenceSet c = make_set({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                                 {Vec3(0, 0, 1), Vec3(1, 0, 3)}, {1.0, 0.5});
  // identity motion: residuals are (0,0,1) and (0,0,3)
  const double e = weighted_alignment_error(c, RigidTransform());
  CHECK(e == doctest::Approx(1.0 * 1.0 + 0.5 * 9.0).epsilon(1e-15));
}
