#include "sedtomo/crystal.hpp"
#include "sedtomo/diffraction.hpp"
#include "sedtomo/peaks.hpp"

#include <benchmark/benchmark.h>

using namespace sedtomo;

namespace {

BeamColumn strained_column(int nz) {
  BeamColumn col;
  Mat3 A = Mat3::Identity();
  A(0, 0) += 0.01;
  A(0, 1) += 0.004;
  for (int k = 0; k < nz; ++k) {
    col.A.push_back(A);
    col.b.push_back(Vec3::Zero());
    col.z.push_back(25.0 * (k - 0.5 * (nz - 1)));
  }
  col.rho = 25.0;
  return col;
}

}  // namespace

static void BM_SimulatePattern(benchmark::State& state) {
  const IdealCrystal si = silicon(SiliconZone::Z001, 5.0);
  const Probe probe;
  const DetectorGrid grid = DetectorGrid::covering(4.5, 0.02);
  const BeamColumn col = strained_column(int(state.range(0)));
  const SpotShape shape(probe, col.rho);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_pattern(si, col, probe, grid, shape));
}
BENCHMARK(BM_SimulatePattern)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_SimulatePrecessed(benchmark::State& state) {
  const IdealCrystal si = silicon(SiliconZone::Z001, 5.0);
  const Probe probe;
  const DetectorGrid grid = DetectorGrid::covering(4.5, 0.02);
  const BeamColumn col = strained_column(10);
  const SpotShape shape(probe, col.rho);
  const PrecessionConfig prec{2.0 * kPi / 180.0, int(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(simulate_precessed(si, col, probe, grid, shape, prec));
}
BENCHMARK(BM_SimulatePrecessed)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_Detect(benchmark::State& state) {
  const IdealCrystal si = silicon(SiliconZone::Z001, 5.0);
  const Probe probe;
  const DetectorGrid grid = DetectorGrid::covering(4.5, 0.02);
  const BeamColumn ref = strained_column(1), col = strained_column(10);
  const SpotShape shape(probe, 25.0);
  BeamColumn flat = ref;
  flat.A[0] = Mat3::Identity();
  const DiffractionPattern p0 = simulate_pattern(si, flat, probe, grid, shape);
  const DiffractionPattern p = simulate_pattern(si, col, probe, grid, shape);
  const DiskSet disks = make_disk_set(si, inner_ring(si), 0.8);
  const bool registered = state.range(0) != 0;
  for (auto _ : state) {
    if (registered)
      benchmark::DoNotOptimize(detect_registered(p, p0, disks, {0.1, true}));
    else
      benchmark::DoNotOptimize(detect_com(p, disks));
  }
  state.SetLabel(registered ? "registered" : "centre of mass");
}
BENCHMARK(BM_Detect)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
