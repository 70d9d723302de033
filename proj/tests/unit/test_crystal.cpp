#include "doctest.h"
#include "support.hpp"

#include "sedtomo/crystal.hpp"

#include <Eigen/Dense>
#include <cmath>

using namespace sedtomo;

namespace {

// Independent oracle: B^T A = 2 pi I  =>  B = 2 pi A^{-T}.
Mat3 dual_by_inverse(const Mat3& A) { return kTwoPi * A.inverse().transpose(); }

std::size_t brute_force_count(const ReciprocalLattice& rec, double cutoff, int n) {
  std::size_t count = 0;
  for (int h = -n; h <= n; ++h)
    for (int k = -n; k <= n; ++k)
      for (int l = -n; l <= n; ++l)
        if (rec.point({h, k, l}).norm() <= cutoff) ++count;
  return count;
}

}  // namespace

TEST_CASE("orthonormal direct basis gives 2 pi reciprocal vectors") {
  const DirectLattice lat{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const ReciprocalLattice rec = reciprocal_from_direct(lat);
  CHECK((rec.a_star - kTwoPi * Vec3::UnitX()).norm() < 1e-14);
  CHECK((rec.b_star - kTwoPi * Vec3::UnitY()).norm() < 1e-14);
  CHECK((rec.c_star - kTwoPi * Vec3::UnitZ()).norm() < 1e-14);
}

TEST_CASE("2 pi identity reciprocal basis maps back to the identity") {
  const ReciprocalLattice rec{kTwoPi * Vec3::UnitX(), kTwoPi * Vec3::UnitY(), kTwoPi * Vec3::UnitZ()};
  const DirectLattice lat = direct_from_reciprocal(rec);
  CHECK((lat.matrix() - Mat3::Identity()).norm() < 1e-14);
}

TEST_CASE("silicon reciprocal length") {
  const double a = kSiliconLatticeConstant;
  const DirectLattice lat{Vec3(a, 0, 0), Vec3(0, a, 0), Vec3(0, 0, a)};
  CHECK(reciprocal_from_direct(lat).a_star.norm() == doctest::Approx(kTwoPi / a).epsilon(1e-14));
}

TEST_CASE("random bases: duality and round trip") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 A = Mat3::Identity() * 4.0 + testing::random_matrix(rng, 2.0);
    if (std::abs(A.determinant()) < 1.0) continue;
    const DirectLattice lat{A.col(0), A.col(1), A.col(2)};
    const ReciprocalLattice rec = reciprocal_from_direct(lat);
    const Mat3 B = rec.matrix();
    const double scale = A.norm() * B.norm();
    CHECK((A.transpose() * B - kTwoPi * Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK((B - dual_by_inverse(A)).norm() <= 1e-12 * B.norm());
    CHECK((direct_from_reciprocal(rec).matrix() - A).norm() <= 1e-12 * A.norm());
    CHECK(rec.volume() == doctest::Approx(std::pow(kTwoPi, 3) / std::abs(A.determinant())).epsilon(1e-12));
  }
}

TEST_CASE("degenerate lattices are rejected") {
  const DirectLattice flat{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  CHECK_THROWS_AS(reciprocal_from_direct(flat), DegenerateLatticeError);
  const ReciprocalLattice tiny{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 1e-15)};
  CHECK_THROWS_AS(direct_from_reciprocal(tiny), DegenerateLatticeError);
}

TEST_CASE("peak enumeration on the 2 pi cubic lattice") {
  const ReciprocalLattice rec{kTwoPi * Vec3::UnitX(), kTwoPi * Vec3::UnitY(), kTwoPi * Vec3::UnitZ()};
  const IdealCrystal c = enumerate_peaks(rec, kTwoPi * 1.5, WeightModel::unit());
  REQUIRE(c.peaks.size() == 19);
  int origin = 0, first = 0, second = 0;
  for (const Peak& p : c.peaks) {
    const double r = p.p.norm() / kTwoPi;
    if (r < 1e-12) ++origin;
    else if (std::abs(r - 1) < 1e-12) ++first;
    else if (std::abs(r - std::sqrt(2.0)) < 1e-12) ++second;
  }
  CHECK(origin == 1);
  CHECK(first == 6);
  CHECK(second == 12);
  CHECK(enumerate_peaks(rec, 0.5 * kTwoPi, WeightModel::unit()).peaks.size() == 1);
}

TEST_CASE("peak enumeration matches a brute-force integer scan on random lattices") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mat3 A = Mat3::Identity() * 5.0 + testing::random_matrix(rng, 1.5);
    const ReciprocalLattice rec = reciprocal_from_direct({A.col(0), A.col(1), A.col(2)});
    const double cutoff = 4.0;
    const IdealCrystal c = enumerate_peaks(rec, cutoff, WeightModel::gaussian(2.0));
    CHECK(c.peaks.size() == brute_force_count(rec, cutoff, 12));
    for (std::size_t i = 1; i < c.peaks.size(); ++i) CHECK(c.peaks[i - 1].p.norm() <= c.peaks[i].p.norm() + 1e-12);
    for (const Peak& p : c.peaks) {
      CHECK(p.p.norm() <= cutoff);
      CHECK((rec.point(p.hkl) - p.p).norm() < 1e-12);
      const long j = c.find({-p.hkl[0], -p.hkl[1], -p.hkl[2]});
      REQUIRE(j >= 0);
      CHECK(std::abs(c.peaks[std::size_t(j)].w - std::conj(p.w)) < 1e-15);
    }
  }
}

TEST_CASE("enumeration respects the peak limit") {
  const ReciprocalLattice rec{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  CHECK_THROWS_AS(enumerate_peaks(rec, 20.0, WeightModel::unit(), 1000), ResourceLimitError);
  CHECK_THROWS_AS(enumerate_peaks(rec, -1.0, WeightModel::unit()), PreconditionError);
}

TEST_CASE("weight models are conjugate symmetric") {
  std::map<Miller, cplx> table{{{1, 0, 0}, cplx(0.3, 0.4)}, {{0, 1, 1}, cplx(-0.2, 0.1)}};
  const WeightModel models[] = {WeightModel::unit(), WeightModel::gaussian(1.7), WeightModel::from_table(table),
                                WeightModel::from_table(table, 2.0)};
  const ReciprocalLattice rec{Vec3(1.1, 0, 0), Vec3(0.2, 0.9, 0), Vec3(0.1, 0.3, 1.3)};
  for (const auto& m : models)
    for (int h = -2; h <= 2; ++h)
      for (int k = -2; k <= 2; ++k)
        for (int l = -2; l <= 2; ++l) {
          const Miller a{h, k, l}, b{-h, -k, -l};
          CHECK(std::abs(m.weight(a, rec.point(a)) - std::conj(m.weight(b, rec.point(b)))) < 1e-15);
        }
  const WeightModel t = WeightModel::from_table(table);
  CHECK(t.weight({-1, 0, 0}, Vec3::Zero()) == std::conj(cplx(0.3, 0.4)));
  CHECK(t.weight({2, 0, 0}, Vec3::Zero()) == cplx(0.0));
  CHECK(WeightModel::gaussian(2.0).weight({1, 0, 0}, Vec3(2, 0, 0)).real() == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("diamond structure factor") {
  CHECK(std::abs(diamond_structure_factor({0, 0, 0}) - cplx(1.0)) < 1e-15);
  CHECK(std::abs(diamond_structure_factor({2, 0, 0})) < 1e-15);
  CHECK(std::abs(diamond_structure_factor({1, 1, 0})) < 1e-15);
  CHECK(std::abs(diamond_structure_factor({2, 2, 0}) - cplx(1.0)) < 1e-15);
  CHECK(std::abs(diamond_structure_factor({1, 1, 1})) == doctest::Approx(std::sqrt(0.5)));
  CHECK(std::abs(diamond_structure_factor({4, 0, 0}) - cplx(1.0)) < 1e-15);
}

TEST_CASE("zone axis rotation maps the zone to e3") {
  const Mat3 R = zone_axis_rotation(Vec3(0, 1, 1));
  CHECK((R * Vec3(0, 1, 1).normalized() - Vec3::UnitZ()).norm() < 1e-15);
  CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-15);
  CHECK(R.determinant() == doctest::Approx(1.0));
  CHECK((R.row(0).transpose() - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((R.row(1).transpose() - Vec3(0, 1, -1) / std::sqrt(2.0)).norm() < 1e-15);
  CHECK((zone_axis_rotation(Vec3::UnitZ()) - Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("silicon presets") {
  const double a = kSiliconLatticeConstant;
  const IdealCrystal si = silicon(SiliconZone::Z001, 2.5);
  double first_projected = 1e9;
  for (const Peak& p : si.peaks) {
    CHECK(std::abs(p.w) > 0.0);
    const double r = p.p.head<2>().norm();
    if (r > 1e-9) first_projected = std::min(first_projected, r);
    // all-odd or all-even with h+k+l divisible by 4
    const int h = p.hkl[0], k = p.hkl[1], l = p.hkl[2];
    const bool odd = (h & 1) && (k & 1) && (l & 1);
    const bool even = !(h & 1) && !(k & 1) && !(l & 1) && ((h + k + l) % 4 == 0);
    CHECK((odd || even));
  }
  CHECK(first_projected == doctest::Approx(kTwoPi * std::sqrt(2.0) / a).epsilon(1e-12));
  CHECK(si.peaks.size() == 1 + 8);  // origin and the {111} family below 2.5 Å⁻¹

  const IdealCrystal si011 = silicon(SiliconZone::Z011, 4.0);
  for (const Peak& p : si011.peaks) {
    const Vec3 zone = Vec3(0, 1, 1).normalized();
    const Vec3 cubic = kTwoPi / a * Vec3(p.hkl[0], p.hkl[1], p.hkl[2]);
    CHECK(p.p.z() == doctest::Approx(cubic.dot(zone)).epsilon(1e-12));
  }
}
