#include "crom/adaptivity.hpp"
#include "crom/cit.hpp"
#include "crom/materials.hpp"
#include "crom/solver.hpp"
#include "crom/spectral.hpp"

#include <benchmark/benchmark.h>

#include <complex>
#include <vector>

using namespace crom;

namespace {

VoxelGrid square_grid(int n) {
  std::vector<int> labels(static_cast<std::size_t>(n * n), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((i - n / 2) * (i - n / 2) + (j - n / 2) * (j - n / 2) < n * n / 16) labels[static_cast<std::size_t>(i * n + j)] = 1;
  return VoxelGrid({n, n}, {1.0, 1.0}, labels);
}

// Clusters made of interleaved voxel stripes within each phase.
ClusterMap striped_map(const VoxelGrid& grid, int per_phase) {
  ClusterMap map(grid.size());
  for (int phase : grid.phases()) {
    std::vector<std::vector<int>> parts(static_cast<std::size_t>(per_phase));
    int k = 0;
    for (int v = 0; v < grid.size(); ++v)
      if (grid.label(v) == phase) parts[static_cast<std::size_t>(k++ % per_phase)].push_back(v);
    for (auto& p : parts)
      if (!p.empty()) map.add_cluster(phase, p);
  }
  return map;
}

const ReferenceMaterial kRef = ReferenceMaterial::make(30.0, 20.0);

}  // namespace

static void BM_Fft(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FourierTransform fft({n, n});
  std::vector<std::complex<double>> in(static_cast<std::size_t>(n * n), {1.0, 0.5}), out(in.size());
  for (auto _ : state) {
    fft.forward(in, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Fft)->Arg(64)->Arg(128)->Arg(256);

static void BM_CitAssembly(benchmark::State& state) {
  const auto grid = square_grid(64);
  const auto green = assemble_green_operator(kRef, FrequencyGrid(grid));
  const auto map = striped_map(grid, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_matrix(map, green));
  state.counters["clusters"] = map.n_active();
}
BENCHMARK(BM_CitAssembly)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_CitIncrementalUpdate(benchmark::State& state) {
  const auto grid = square_grid(64);
  const auto green = assemble_green_operator(kRef, FrequencyGrid(grid));
  const auto map = striped_map(grid, 16);
  const auto old = assemble_matrix(map, green);
  auto refined = map;
  std::vector<double> coords;
  std::vector<int> ids;
  for (int v = 0; v < grid.size(); ++v) {
    coords.push_back(v / 64);
    coords.push_back(v % 64);
    ids.push_back(v);
  }
  const FeatureDataset features(2, coords, ids);
  split_cluster(refined, refined.active_ids().front(), static_cast<int>(state.range(0)), features, 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(incremental_update(old, map, refined, green));
}
BENCHMARK(BM_CitIncrementalUpdate)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_NewtonIncrement(benchmark::State& state) {
  const auto grid = square_grid(32);
  const MaterialTable mats{{0, PhaseMaterial::von_mises(100.0, 0.3, 0.5, 0.2, 0.4)},
                           {1, PhaseMaterial::elastic(1.0, 0.19)}};
  const auto green = assemble_green_operator(kRef, FrequencyGrid(grid));
  const auto map = striped_map(grid, static_cast<int>(state.range(0)));
  const auto tensors = assemble_matrix(map, green).tensors(kRef);
  const std::vector<ClusterState> states(static_cast<std::size_t>(map.n_active()));
  MacroIncrement load;
  load.value = Vec3(2e-2, 0.0, 0.0);
  const SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(newton_solve_increment(map, mats, tensors, kRef, states, load, cfg));
}
BENCHMARK(BM_NewtonIncrement)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
