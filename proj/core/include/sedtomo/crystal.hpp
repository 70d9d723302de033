#pragma once

#include "sedtomo/common.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <vector>

namespace sedtomo {

using Miller = std::array<int, 3>;

struct DirectLattice {
  Vec3 a, b, c;  // Å

  /// Columns a, b, c.
  Mat3 matrix() const;
  double volume() const;
};

struct ReciprocalLattice {
  Vec3 a_star, b_star, c_star;  // Å⁻¹

  Mat3 matrix() const;
  double volume() const;
  Vec3 point(const Miller& hkl) const;
};

ReciprocalLattice reciprocal_from_direct(const DirectLattice& lat);
DirectLattice direct_from_reciprocal(const ReciprocalLattice& rec);

struct WeightModel {
  enum class Kind { Unit, Gaussian, Table };
  Kind kind = Kind::Gaussian;
  double s = 2.5;  // Gaussian width, Å⁻¹
  /// Table entries by (h,k,l); missing conjugate partners are filled with conj().
  std::map<Miller, cplx> table;
  /// Optional Gaussian envelope applied to table weights; 0 disables it.
  double envelope_s = 0.0;

  static WeightModel unit();
  static WeightModel gaussian(double s);
  static WeightModel from_table(std::map<Miller, cplx> table, double envelope_s = 0.0);

  cplx weight(const Miller& hkl, const Vec3& p) const;
};

struct Peak {
  Vec3 p;
  cplx w;
  Miller hkl;
};

struct IdealCrystal {
  ReciprocalLattice reciprocal;
  std::vector<Peak> peaks;  // the flat peak index is the position in this list
  double cutoff_radius = 0.0;

  DirectLattice direct() const { return direct_from_reciprocal(reciprocal); }
  /// Flat index of (h,k,l), or -1.
  long find(const Miller& hkl) const;
};

inline constexpr std::size_t kDefaultPeakLimit = 2'000'000;

/// All lattice points with |p| <= cutoff, sorted by (|p|, h, k, l).
IdealCrystal enumerate_peaks(const ReciprocalLattice& rec, double cutoff, const WeightModel& model,
                             std::size_t max_peaks = kDefaultPeakLimit);

/// Rotation taking the crystal direction `zone` to e3; rows are the lab axes in crystal coordinates.
Mat3 zone_axis_rotation(const Vec3& zone);

ReciprocalLattice rotate(const ReciprocalLattice& rec, const Mat3& R);
DirectLattice rotate(const DirectLattice& lat, const Mat3& R);

inline constexpr double kSiliconLatticeConstant = 5.431;

/// Structure factor of the diamond lattice (8 atoms per cubic cell), normalised so F(000) = 1.
cplx diamond_structure_factor(const Miller& hkl);

enum class SiliconZone { Z001, Z011 };

/// Silicon with the chosen zone axis along e3, diamond weights times a Gaussian envelope.
IdealCrystal silicon(SiliconZone zone, double cutoff, double envelope_s = 2.5);

}  // namespace sedtomo
