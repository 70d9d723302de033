#include "sedtomo/recon.hpp"
#include "sedtomo/tomo.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sedtomo;

namespace {

AcquisitionGeometry bench_geometry(int n, int tilts) {
  AcquisitionGeometry g;
  for (const Vec3& d : fibonacci_directions(tilts)) g.tilts.push_back(make_tilt(d));
  g.scan = {n, n, 1.0};
  return g;
}

TensorVolume random_volume(const Grid& grid) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TensorVolume F = zero_tensor_volume(grid);
  for (Mat3& m : F.data)
    for (int e = 0; e < 9; ++e) m(e / 3, e % 3) = u(rng);
  return F;
}

}  // namespace

static void BM_TrtForward(benchmark::State& state) {
  const int n = int(state.range(0));
  const Grid grid = Grid::centred({n, n, n}, 1.0);
  const AcquisitionGeometry geom = bench_geometry(n, 8);
  const TensorVolume F = random_volume(grid);
  for (auto _ : state) benchmark::DoNotOptimize(trt_forward(F, geom, 1));
  state.SetItemsProcessed(state.iterations() * std::int64_t(geom.rays()));
}
BENCHMARK(BM_TrtForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_TrtAdjoint(benchmark::State& state) {
  const int n = int(state.range(0));
  const Grid grid = Grid::centred({n, n, n}, 1.0);
  const AcquisitionGeometry geom = bench_geometry(n, 8);
  const TensorSinogram d = trt_forward(random_volume(grid), geom, 1);
  for (auto _ : state) benchmark::DoNotOptimize(trt_adjoint(d, geom, grid, 1));
  state.SetItemsProcessed(state.iterations() * std::int64_t(geom.rays()));
}
BENCHMARK(BM_TrtAdjoint)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_RayOperatorForward(benchmark::State& state) {
  const int n = int(state.range(0));
  const Grid grid = Grid::centred({n, n, n}, 1.0);
  const RayOperator op(grid, bench_geometry(n, 8), 1);
  const TensorVolume F = random_volume(grid);
  std::vector<Mat3> out;
  for (auto _ : state) {
    op.forward(F.data, out);
    benchmark::ClobberMemory();
  }
  state.counters["nnz"] = double(op.nnz());
}
BENCHMARK(BM_RayOperatorForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_TensorGradient(benchmark::State& state) {
  const int n = int(state.range(0));
  const Grid grid = Grid::centred({n, n, n}, 1.0);
  const TensorVolume F = random_volume(grid);
  std::vector<std::array<Mat3, 3>> g;
  for (auto _ : state) {
    tensor_gradient(grid, F.data, g);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_TensorGradient)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
