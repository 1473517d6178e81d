#include "pieceflow/metrics.hpp"
#include "pieceflow/nn_search.hpp"
#include "pieceflow/oversegment.hpp"
#include "pieceflow/pipeline.hpp"
#include "pieceflow/rigid_align.hpp"

#include <benchmark/benchmark.h>

#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <vector>

using namespace pieceflow;

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  Vec3 in_box(double half) {
    return Vec3(uniform(-half, half), uniform(-half, half), uniform(-half, half));
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<Vec3> random_points(Rng& rng, std::size_t n, double half) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.in_box(half));
  return pts;
}

struct Scene {
  PointCloud source;
  PointCloud target;
  FlowField forward;
  FlowField backward;
};

Scene make_scene(std::size_t n) {
  Rng rng(29);
  const Mat3 rot = Eigen::AngleAxisd(0.05, Vec3(0, 0, 1).normalized()).toRotationMatrix();
  const Vec3 trans(0.3, -0.1, 0.05);
  std::vector<Vec3> src = random_points(rng, n, 2.0);
  std::vector<Vec3> dst(n), fwd(n), bwd(n);
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = rot * src[i] + trans;
    fwd[i] = dst[i] - src[i];
    bwd[i] = src[i] - dst[i];
  }
  return Scene{PointCloud(std::move(src)), PointCloud(std::move(dst)), FlowField(std::move(fwd)),
               FlowField(std::move(bwd))};
}

}  // namespace

static void BM_WeightedKabsch(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(17);
  CorrespondenceSet c;
  const Mat3 rot = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = rng.in_box(1.0);
    c.src.push_back(p);
    c.dst.push_back(rot * p + Vec3(0.2, 0, -0.1));
    c.weights.push_back(rng.uniform());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(weighted_kabsch(c));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_WeightedKabsch)->Arg(256)->Arg(2048)->Arg(8192);

static void BM_NeighborIndexBuild(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(19);
  const PointCloud cloud(random_points(rng, n, 10.0));
  for (auto _ : state) {
    NeighborIndex index(cloud);
    benchmark::DoNotOptimize(index.size());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_NeighborIndexBuild)->Arg(8192)->Arg(65536);

static void BM_NeighborIndexQuery(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(23);
  const PointCloud cloud(random_points(rng, n, 10.0));
  const NeighborIndex index(cloud);
  const std::vector<Vec3> queries = random_points(rng, 1024, 10.5);
  for (auto _ : state) {
    for (const Vec3& q : queries) {
      benchmark::DoNotOptimize(index.nearest(q));
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 1024);
}
BENCHMARK(BM_NeighborIndexQuery)->Arg(8192)->Arg(65536);

static void BM_Segment(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(27);
  const PointCloud cloud(random_points(rng, n, 5.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(segment(cloud, 30, 0));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Segment)->Arg(8192);

static void BM_GeneratePseudoLabels(benchmark::State& state) {
  const Scene scene = make_scene(static_cast<std::size_t>(state.range(0)));
  PipelineConfig cfg;  // scene profile: 30 regions, 4 iterations
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_pseudo_labels(scene.source, scene.target, scene.forward,
                                                    scene.backward, cfg));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_GeneratePseudoLabels)->Arg(8192)->Unit(benchmark::kMillisecond);

static void BM_Evaluate(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(31);
  std::vector<Vec3> est = random_points(rng, n, 1.0);
  std::vector<Vec3> truth = random_points(rng, n, 1.0);
  const FlowField estimate{std::move(est)}, reference{std::move(truth)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(estimate, reference));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Evaluate)->Arg(8192);

BENCHMARK_MAIN();
