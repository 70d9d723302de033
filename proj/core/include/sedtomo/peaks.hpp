#pragma once

#include "sedtomo/common.hpp"
#include "sedtomo/crystal.hpp"
#include "sedtomo/diffraction.hpp"

#include <vector>

namespace sedtomo {

struct DiskSet {
  std::vector<Vec2> reference;  // q_i = gamma^T p_i
  std::vector<Vec3> peaks;      // p_i
  std::vector<long> index;      // flat peak indices
  double rbar = 0.0;            // window radius, Å⁻¹
};

/// Smallest distance |p_i - p_j| from a chosen peak to any other weighted peak.
double min_disk_separation(const IdealCrystal& crystal, const std::vector<long>& indices);

/// Disks for the given flat peak indices; rbar <= 0 picks just under half the minimum separation.
DiskSet make_disk_set(const IdealCrystal& crystal, const std::vector<long>& indices, double rbar = 0.0);

/// Peaks in the zero-order plane (|p_z| <= tol) at the smallest non-zero radius.
std::vector<long> inner_ring(const IdealCrystal& crystal, double tol = 1e-9);

enum class CentreMethod { CentreOfMass, Registered };

const char* method_name(CentreMethod m);

struct CentreMeasurement {
  CentreMethod method = CentreMethod::CentreOfMass;
  std::vector<Vec2> centre;
  std::vector<double> mass;
};

CentreMeasurement detect_com(const DiffractionPattern& pattern, const DiskSet& disks);

struct RegistrationOptions {
  double max_shift = 0.0;  // Å⁻¹; 0 means rbar
  bool subpixel = true;
};

/// Per-disk shift s minimising sum over the window of (D(k) - D0(k - s))^2; returns q_i + s.
CentreMeasurement detect_registered(const DiffractionPattern& pattern, const DiffractionPattern& reference,
                                    const DiskSet& disks, const RegistrationOptions& opt = {});

/// Least-squares M with c_i ~ M q_i; equals gamma^T A^T gamma for in-plane peaks.
Mat2 centres_to_tensor(const std::vector<Vec2>& centres, const DiskSet& disks);
inline Mat2 centres_to_tensor(const CentreMeasurement& m, const DiskSet& disks) {
  return centres_to_tensor(m.centre, disks);
}

/// frame * t2 * frame^T, frame = [e_u e_v] orthonormal and orthogonal to xi.
Mat3 embed_projection(const Mat2& t2, const Vec3& xi, const Mat32& frame);

double recommend_alpha(double sigma, double wavelength, double P);

double relative_error(const Vec2& c_true, const Vec2& c);

}  // namespace sedtomo
