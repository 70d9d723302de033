#include "doctest.h"
#include "support.hpp"

#include "sedtomo/deformation.hpp"
#include "sedtomo/peaks.hpp"
#include "sedtomo/tomo.hpp"

#include <cmath>
#include <numeric>

using namespace sedtomo;

namespace {

AcquisitionGeometry random_geometry(std::mt19937_64& rng, int tilts, ScanGrid scan, double limit = kPi / 2) {
  AcquisitionGeometry g;
  g.scan = scan;
  g.tilt_limit = limit;
  while (int(g.tilts.size()) < tilts) {
    Vec3 d = testing::random_unit(rng);
    if (d.z() < 0) d = -d;
    if (std::acos(d.z()) <= limit) g.tilts.push_back(make_tilt(d));
  }
  return g;
}

TensorVolume random_volume(const Grid& grid, std::mt19937_64& rng) {
  TensorVolume v(grid, Mat3::Zero());
  for (Mat3& m : v.data) m = testing::random_matrix(rng);
  return v;
}

TensorSinogram random_sinogram(const AcquisitionGeometry& g, std::mt19937_64& rng) {
  TensorSinogram s = TensorSinogram::zeros(g);
  for (Mat3& m : s.data) m = testing::random_matrix(rng);
  return s;
}

double dot(const std::vector<Mat3>& a, const std::vector<Mat3>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].array() * b[i].array()).sum();
  return s;
}

// Test-side trilinear interpolant with zero padding.
template <class T>
T interpolate(const Volume<T>& v, const Vec3& x, T zero) {
  const Vec3 g = (x - v.grid.origin) / v.grid.voxel;
  const Eigen::Vector3i i0 = g.array().floor().cast<int>();
  const Vec3 f = g - i0.cast<double>();
  T acc = zero;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const int i = i0[0] + di, j = i0[1] + dj, k = i0[2] + dk;
        if (i < 0 || j < 0 || k < 0 || i >= v.grid.n[0] || j >= v.grid.n[1] || k >= v.grid.n[2]) continue;
        const double w = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) * (dk ? f[2] : 1 - f[2]);
        acc += w * v.data[v.grid.index(i, j, k)];
      }
  return acc;
}

// Midpoint rule on the interpolant at a step of voxel / 16 over a generous chord.
Mat3 fine_integral(const TensorVolume& F, const Vec3& o, const Vec3& xi) {
  const double h = F.grid.voxel / 16.0;
  const double half = 2.0 * F.grid.voxel * (F.grid.n[0] + F.grid.n[1] + F.grid.n[2]);
  Mat3 acc = Mat3::Zero();
  for (double t = -half + 0.5 * h; t < half; t += h) acc += interpolate(F, o + t * xi, Mat3::Zero().eval());
  const Mat3 P = transverse_projector(xi);
  return P * (h * acc) * P;
}

TensorVolume smooth_volume(const Grid& grid, std::mt19937_64& rng) {
  Mat3 a = testing::random_matrix(rng), b = testing::random_matrix(rng);
  TensorVolume v(grid, Mat3::Zero());
  const double L = grid.voxel * grid.n[0];
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Vec3 x = (grid.centre(j) - grid.box_centre()) / L;
    const double bump = std::exp(-8.0 * x.squaredNorm());
    v.data[j] = bump * (a + std::sin(3.0 * x.x() + 2.0 * x.z()) * b);
  }
  return v;
}

}  // namespace

TEST_CASE("tilt frames") {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 50; ++i) {
    const Tilt t = make_tilt(testing::random_unit(rng));
    const Mat3 F = t.frame();
    CHECK((F.transpose() * F - Mat3::Identity()).norm() < 1e-14);
    CHECK(F.determinant() == doctest::Approx(1.0));
  }
  const Tilt pole = make_tilt(Vec3::UnitX());
  CHECK((pole.frame().transpose() * pole.frame() - Mat3::Identity()).norm() < 1e-14);
  CHECK_THROWS_AS(make_tilt(Vec3::Zero()), PreconditionError);
}

TEST_CASE("constant identity field on a cube") {
  const Grid grid = Grid::centred({6, 6, 6}, 1.0 / 6.0);
  AcquisitionGeometry g;
  g.tilts = {make_tilt(Vec3::UnitZ())};
  g.scan = {1, 1, 0.1};
  const TensorVolume F(grid, Mat3::Identity());
  const auto s = trt_forward(F, g);
  // trilinear ramps to zero over one voxel past each face: chord = side length
  CHECK((s.data[0] - Vec3(1, 1, 0).asDiagonal().toDenseMatrix()).norm() < 1e-12);
}

TEST_CASE("forward and adjoint are transposes") {
  std::mt19937_64 rng(11);
  const Grid grid = Grid::centred({7, 8, 6}, 1.3);
  const auto g = random_geometry(rng, 9, {7, 6, 1.1});
  const RayOperator op(grid, g, 2);
  for (int trial = 0; trial < 3; ++trial) {
    const TensorVolume F = random_volume(grid, rng);
    TensorSinogram d = random_sinogram(g, rng);
    const auto JF = op.forward(F);
    const auto Jd = op.adjoint(d);
    const double lhs = dot(JF.data, d.data), rhs = dot(F.data, Jd.data);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    // the matrix-free path integrates the same weights
    const auto JF2 = trt_forward(F, g, 2);
    double diff = 0.0, norm = 0.0;
    for (std::size_t r = 0; r < JF.size(); ++r) {
      diff += (JF.data[r] - JF2.data[r]).squaredNorm();
      norm += JF.data[r].squaredNorm();
    }
    CHECK(std::sqrt(diff / norm) < 1e-12);
  }
  CHECK(op.nnz() > 0);

  TensorSinogram zero = TensorSinogram::zeros(g);
  for (const Mat3& m : trt_adjoint(zero, g, grid).data) CHECK(m.norm() == 0.0);

  // single ray: back-projection touches only voxels the ray passes
  TensorSinogram one = TensorSinogram::zeros(g);
  one.data[17] = Mat3::Identity();
  const auto bp = trt_adjoint(one, g, grid);
  const Vec3 o = g.ray_origin(17), xi = g.ray_tilt(17).xi;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Vec3 x = grid.centre(j) - o;
    const double dist = (x - x.dot(xi) * xi).norm();
    if (dist > std::sqrt(3.0) * grid.voxel) CHECK(bp.data[j].norm() == 0.0);
  }

  // masked rays do not back-project
  TensorSinogram masked = one;
  masked.mask[17] = 0;
  for (const Mat3& m : trt_adjoint(masked, g, grid).data) CHECK(m.norm() == 0.0);

  TensorSinogram wrong = TensorSinogram::zeros(g);
  wrong.data.pop_back();
  wrong.mask.pop_back();
  CHECK_THROWS_AS(trt_adjoint(wrong, g, grid), ShapeMismatchError);
}

TEST_CASE("sinogram entries annihilate the beam direction") {
  std::mt19937_64 rng(12);
  const Grid grid = Grid::centred({8, 8, 8}, 1.0);
  const auto g = random_geometry(rng, 12, {5, 5, 1.5});
  const auto s = trt_forward(random_volume(grid, rng), g);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const Vec3& xi = g.ray_tilt(r).xi;
    CHECK((s.data[r] * xi).norm() <= 1e-13);
    CHECK((xi.transpose() * s.data[r]).norm() <= 1e-13);
  }
}

TEST_CASE("transverse transform commutes with symmetrisation") {
  std::mt19937_64 rng(13);
  const Grid grid = Grid::centred({6, 6, 6}, 1.0);
  const auto g = random_geometry(rng, 10, {4, 4, 1.2});
  const TensorVolume F = random_volume(grid, rng);
  TensorVolume S = F;
  for (Mat3& m : S.data) m = sym(m);
  const auto a = trt_forward(F, g), b = trt_forward(S, g);
  for (std::size_t r = 0; r < a.size(); ++r) CHECK((sym(a.data[r]) - b.data[r]).norm() <= 1e-12);
}

TEST_CASE("skew fields reduce to the longitudinal transform") {
  std::mt19937_64 rng(14);
  const Grid grid = Grid::centred({6, 7, 5}, 0.8);
  const auto g = random_geometry(rng, 10, {4, 4, 1.0});
  VectorVolume f(grid, Vec3::Zero());
  TensorVolume F(grid, Mat3::Zero());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    f.data[j] = testing::random_vector(rng);
    F.data[j] = cross_matrix(f.data[j]);
  }
  const auto J = trt_forward(F, g);
  const auto I = lrt_forward(f, g);
  for (std::size_t r = 0; r < J.size(); ++r)
    CHECK((J.data[r] - I.data[r] * cross_matrix(g.ray_tilt(r).xi)).norm() <= 1e-12);

  // constant f with F = [f]x: explicit chord integral
  VectorVolume c(grid, Vec3(0.2, -0.1, 0.4));
  TensorVolume C(grid, cross_matrix(Vec3(0.2, -0.1, 0.4)));
  const auto Jc = trt_forward(C, g);
  const auto Ic = lrt_forward(c, g);
  for (std::size_t r = 0; r < Jc.size(); ++r)
    CHECK((Jc.data[r] - Ic.data[r] * cross_matrix(g.ray_tilt(r).xi)).norm() <= 1e-12);
}

TEST_CASE("longitudinal transform of constant fields") {
  const Grid grid = Grid::centred({8, 8, 8}, 1.0);
  AcquisitionGeometry g;
  g.tilts = {make_tilt(Vec3::UnitZ())};
  g.scan = {3, 3, 1.0};
  const VectorVolume perp(grid, Vec3(1.0, 0.5, 0.0));
  for (double v : lrt_forward(perp, g).data) CHECK(std::abs(v) < 1e-14);
  const VectorVolume par(grid, Vec3(0.0, 0.0, 2.0));
  for (double v : lrt_forward(par, g).data) CHECK(v == doctest::Approx(2.0 * 8.0));
}

TEST_CASE("gradients have vanishing longitudinal transform") {
  // phi = (0.64 - |x|^2)^3 inside the ball, sampled gradient integrated by the discrete transform
  double prev = 1e9;
  for (int n : {8, 16, 32}) {
    const Grid grid = Grid::centred({n, n, n}, 2.0 / n);
    VectorVolume f(grid, Vec3::Zero());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const Vec3 x = grid.centre(j);
      const double r2 = x.squaredNorm();
      f.data[j] = r2 < 0.64 ? Vec3(-6.0 * std::pow(0.64 - r2, 2) * x) : Vec3::Zero();
    }
    std::mt19937_64 grng(16);
    const auto g = random_geometry(grng, 6, {5, 5, 0.2});
    const auto I = lrt_forward(f, g);
    double worst = 0.0;
    for (double v : I.data) worst = std::max(worst, std::abs(v));
    INFO("n = " << n << " max |I grad phi| = " << worst);
    CHECK(worst < prev);
    prev = worst;
  }
  CHECK(prev < 5e-3);
}

TEST_CASE("gauge fields") {
  const Grid grid = Grid::centred({6, 6, 6}, 1.0);
  ScalarVolume c(grid, 3.0);
  const auto Gc = gauge_field(c);
  // interior voxels see a constant; boundary differences see the zero padding
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto ijk = grid.unravel(j);
    bool interior = true;
    for (int a = 0; a < 3; ++a) interior = interior && ijk[a] > 0 && ijk[a] < grid.n[a] - 1;
    if (interior) CHECK(Gc.data[j].norm() == 0.0);
  }
  std::mt19937_64 rng(17);
  ScalarVolume phi(grid, 0.0);
  for (double& v : phi.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  for (const Mat3& m : gauge_field(phi).data) CHECK(sym(m).norm() == 0.0);
}

TEST_CASE("gauge null space is approached under refinement") {
  // J [grad phi]x = (I grad phi)[xi]x, which vanishes in the continuum limit
  std::vector<double> err;
  for (int n : {8, 16, 32}) {
    const Grid grid = Grid::centred({n, n, n}, 2.0 / n);
    ScalarVolume phi(grid, 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double r2 = grid.centre(j).squaredNorm();
      phi.data[j] = r2 < 0.64 ? std::pow(0.64 - r2, 3) : 0.0;
    }
    AcquisitionGeometry g;
    g.scan = {7, 7, 0.2};
    for (const Vec3& d : fibonacci_directions(24)) g.tilts.push_back(make_tilt(d));
    const auto J = trt_forward(gauge_field(phi), g);
    double s = 0.0;
    for (const Mat3& m : J.data) s += m.squaredNorm();
    err.push_back(std::sqrt(s / double(J.size())));
  }
  INFO("errors " << err[0] << " " << err[1] << " " << err[2]);
  CHECK(err[1] < err[0]);
  CHECK(err[2] < err[1]);
  CHECK(err[2] < 0.6 * err[1]);
}

TEST_CASE("fine-step quadrature oracle") {
  std::mt19937_64 rng(18);
  const Grid grid = Grid::centred({8, 8, 8}, 1.0);
  const auto g = random_geometry(rng, 8, {5, 5, 1.3});
  const TensorVolume F = smooth_volume(grid, rng);
  const auto J = trt_forward(F, g);
  double diff = 0.0, norm = 0.0;
  for (std::size_t r = 0; r < J.size(); ++r) {
    const Mat3 ref = fine_integral(F, g.ray_origin(r), g.ray_tilt(r).xi);
    diff += (J.data[r] - ref).squaredNorm();
    norm += ref.squaredNorm();
  }
  const double rel = std::sqrt(diff / norm);
  INFO("relative error " << rel);
  CHECK(rel <= 2e-3);
}

TEST_CASE("rays that miss the volume are zero") {
  const Grid grid = Grid::centred({4, 4, 4}, 1.0);
  AcquisitionGeometry g;
  g.tilts = {make_tilt(Vec3::UnitZ()), make_tilt(Vec3(1, 1, 1))};
  g.scan = {1, 1, 1.0};
  g.centre = Vec3(50, 0, 0);
  for (const Mat3& m : trt_forward(TensorVolume(grid, Mat3::Identity()), g).data) CHECK(m.norm() == 0.0);
}

TEST_CASE("zone axis directions") {
  const DirectLattice cubic{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const auto only = zone_axis_directions(cubic, 0.0, 3);
  REQUIRE(only.size() == 1);
  CHECK((only[0] - Vec3::UnitZ()).norm() < 1e-15);

  const auto dirs = zone_axis_directions(cubic, 70.0 * kPi / 180, 2);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    CHECK(dirs[i].norm() == doctest::Approx(1.0));
    CHECK(std::acos(dirs[i].z()) <= 70.0 * kPi / 180 + 1e-12);
    for (std::size_t j = 0; j < i; ++j) {
      CHECK((dirs[i] - dirs[j]).norm() > 1e-9);
      CHECK((dirs[i] + dirs[j]).norm() > 1e-9);
      CHECK(dirs[j].z() >= dirs[i].z() - 1e-12);  // sorted by tilt
    }
  }
  // brute-force count of distinct primitive directions
  std::size_t count = 0;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b)
      for (int c = 0; c <= 2; ++c) {
        if (std::gcd(std::gcd(std::abs(a), std::abs(b)), c) != 1) continue;
        if (c == 0 && (a < 0 || (a == 0 && b < 0))) continue;
        if (std::acos(c / std::sqrt(double(a * a + b * b + c * c))) <= 70.0 * kPi / 180 + 1e-12) ++count;
      }
  CHECK(dirs.size() == count);

  const IdealCrystal si = silicon(SiliconZone::Z001, 3.0);
  const auto geom = zone_axis_geometry(si, 70.0 * kPi / 180, 1, {3, 3, 10.0});
  CHECK_NOTHROW(geom.validate());
  CHECK(geom.tilts.front().xi.z() == doctest::Approx(1.0));
  CHECK_THROWS_AS(zone_axis_directions(cubic, 2.0, 1), PreconditionError);
}

TEST_CASE("stereographic projection") {
  CHECK(stereographic(Vec3::UnitZ()).norm() == 0.0);
  CHECK(stereographic(-Vec3::UnitZ()).norm() == 0.0);
  // equator maps to the unit circle
  CHECK(stereographic(Vec3(std::cos(0.3), std::sin(0.3), 0.0)).norm() == doctest::Approx(1.0));
  // tilt theta lands at radius tan(theta / 2)
  const double th = 0.6;
  CHECK(stereographic(Vec3(std::sin(th), 0.0, std::cos(th))).norm() == doctest::Approx(std::tan(th / 2)));
  const auto fib = fibonacci_directions(100);
  CHECK(fib.size() == 100);
  for (const Vec3& d : fib) {
    CHECK(d.norm() == doctest::Approx(1.0));
    CHECK(d.z() > 0.0);
  }
}

TEST_CASE("thickness rescaling") {
  AcquisitionGeometry g;
  g.tilts = {make_tilt(Vec3::UnitZ())};
  g.scan = {2, 2, 1.0};
  TensorSinogram avg = TensorSinogram::zeros(g);
  const Mat3 m = Vec3(1.0, 0.9, 0.0).asDiagonal();
  for (Mat3& d : avg.data) d = m;
  const auto out = thickness_rescale(avg, {10.0, 0.0, 2.5, 4.0});
  CHECK((out.data[0] - 10.0 * m).norm() < 1e-15);
  CHECK(out.mask[1] == 0);
  CHECK(out.data[1].norm() == 0.0);
  CHECK((out.data[2] - 2.5 * m).norm() < 1e-15);
  CHECK(out.mask[3] == 1);
  CHECK_THROWS_AS(thickness_rescale(avg, {1.0, 1.0}), ShapeMismatchError);
  CHECK_THROWS_AS(thickness_rescale(avg, {1.0, -1.0, 1.0, 1.0}), PreconditionError);
}

TEST_CASE("column averages times chord reproduce the forward transform") {
  const Grid grid = Grid::centred({4, 4, 10}, 5.0);
  const DeformationField field = sample_layered_phantom({3, 3, 0.02, 21, Alignment::Continuity}, grid);
  TensorVolume At(grid, Mat3::Zero());
  ScalarVolume support(grid, 0.0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    At.data[j] = field.A[j].transpose();
    support.data[j] = field.support[j];
  }
  AcquisitionGeometry g;
  g.tilts = {make_tilt(Vec3::UnitZ())};
  g.scan = {4, 4, grid.voxel};
  g.centre = grid.box_centre();
  const auto J = trt_forward(At, g);
  const auto chord = ray_integrals(support, g);
  TensorSinogram avg = TensorSinogram::zeros(g);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      // gamma^T A^T p for the in-plane unit peaks gives the projected average
      Mat2 t;
      t.col(0) = beam_average_truth(field, a, b, Vec3::UnitX());
      t.col(1) = beam_average_truth(field, a, b, Vec3::UnitY());
      avg.data[g.ray_index(0, a, b)] = embed_projection(t, Vec3::UnitZ(), g.tilts[0].plane());
    }
  const auto scaled = thickness_rescale(avg, chord.data);
  for (std::size_t r = 0; r < J.size(); ++r) {
    CHECK(chord.data[r] == doctest::Approx(50.0));
    CHECK((scaled.data[r] - J.data[r]).norm() <= 1e-10 * J.data[r].norm());
  }
}
