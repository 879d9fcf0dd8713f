#include <random>

#include <benchmark/benchmark.h>

#include "texmap/blend.hpp"
#include "texmap/mrf.hpp"
#include "texmap/synth.hpp"
#include "texmap/visibility.hpp"

namespace {

using namespace texmap;

void BM_LbpIcosphere(benchmark::State& state) {
  const Mesh mesh = make_icosphere(static_cast<int>(state.range(0)));
  const AdjacencyGraph graph = build_adjacency(mesh);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CostVolume costs;
  costs.faces.resize(mesh.face_count());
  for (auto& labels : costs.faces) {
    for (int v = 0; v < 6; ++v) labels.push_back({v, u(rng)});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(lbp_solve(graph, costs, {.lambda = 0.5, .tolerance = 0.0}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.face_count()));
}
BENCHMARK(BM_LbpIcosphere)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DistanceTransform(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mask mask(n, n, 0);
  std::mt19937_64 rng(3);
  std::bernoulli_distribution on(0.9);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) mask(x, y) = on(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(squared_distance_transform(mask));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_DistanceTransform)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RasterizeIcosphere(benchmark::State& state) {
  SceneSpec spec;
  spec.width = spec.height = static_cast<int>(state.range(0));
  const Mesh mesh = make_icosphere(5);
  const PinholeCamera camera = make_cameras(spec).front();
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_depth(mesh, camera));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.face_count()));
}
BENCHMARK(BM_RasterizeIcosphere)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
