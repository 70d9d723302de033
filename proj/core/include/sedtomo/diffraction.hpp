#pragma once

#include "sedtomo/common.hpp"
#include "sedtomo/crystal.hpp"
#include "sedtomo/deformation.hpp"

#include <memory>
#include <vector>

namespace sedtomo {

struct Probe {
  double wavelength = 0.02;  // Å
  double aperture = 0.0;     // Å⁻¹; 0 means a 2 mrad aperture at this wavelength
  double radius = 0.0;       // real-space radius, Å; 0 means the first Airy zero

  double aperture_radius() const;
  double real_space_radius() const;
  static Probe with_semi_angle(double wavelength, double semi_angle);
};

/// Square-pixel detector centred on k = 0; pixel (i, j) sits at ((i - (nx-1)/2) pitch, (j - (ny-1)/2) pitch).
struct DetectorGrid {
  int nx = 512;
  int ny = 512;
  double pitch = 0.02;  // Å⁻¹ per pixel

  std::size_t size() const { return std::size_t(nx) * std::size_t(ny); }
  std::size_t index(int i, int j) const { return std::size_t(j) * std::size_t(nx) + std::size_t(i); }
  double kx(double i) const { return (i - 0.5 * (nx - 1)) * pitch; }
  double ky(double j) const { return (j - 0.5 * (ny - 1)) * pitch; }
  Vec2 k(int i, int j) const { return {kx(i), ky(j)}; }
  double fx(double kx_) const { return kx_ / pitch + 0.5 * (nx - 1); }
  double fy(double ky_) const { return ky_ / pitch + 0.5 * (ny - 1); }
  /// Half-width of the covered square.
  double k_max() const { return 0.5 * std::min(nx - 1, ny - 1) * pitch; }
  static DetectorGrid covering(double k_max, double pitch);
};

struct PrecessionConfig {
  double alpha = 0.0;  // radians
  int n_t = 32;

  void validate() const;
};

struct DiffractionPattern {
  DetectorGrid grid;
  std::vector<double> intensity;
  bool truncated = false;

  double at(int i, int j) const { return intensity[grid.index(i, j)]; }
  double total() const;
};

double ewald_kz(double k_norm, double wavelength);
inline double ewald_kz(const Vec2& k, double wavelength) { return ewald_kz(k.norm(), wavelength); }

/// Rotation used for precession sample t at cone angle alpha.
Mat3 precession_rotation(double alpha, double t);

/// f = rho^2 F[Psi] * sinc(rho .), tabulated on a quadrant grid and evaluated at (|kx|, |ky|).
class SpotShape {
 public:
  /// step <= 0 picks a step resolving both the aperture and the sinc oscillation.
  SpotShape(const Probe& probe, double rho, double step = 0.0, double cutoff_c = kPi);

  double operator()(const Vec2& k) const { return eval(k.x(), k.y()); }
  double eval(double kx, double ky) const;
  double support_radius() const { return support_; }
  double rho() const { return rho_; }
  double aperture() const { return r_; }
  double step() const { return step_; }

  /// Direct quadrature of the convolution at k (no truncation, no table).
  static double exact(double aperture, double rho, const Vec2& k);

 private:
  double r_, rho_, step_, support_;
  int n_;
  std::vector<double> table_;
};

/// Voxels seen by one beam position, expressed in the beam frame.
struct BeamColumn {
  std::vector<Mat3> A;
  std::vector<Vec3> b;
  std::vector<double> z;  // beta_z along the beam
  double rho = 1.0;
};

/// Supported voxels of grid column (ix, iy) for a beam along e3.
BeamColumn column_from_field(const DeformationField& field, int ix, int iy);

/// Supported voxels within rho/2 (in-plane) of the ray centre + u e_u + v e_v; frame = [e_u e_v xi].
BeamColumn column_along_ray(const DeformationField& field, const Mat3& frame, double u, double v,
                            const Vec3& centre);

struct RegionOfInterest {
  Vec2 centre;
  double radius;
};

struct SimulationOptions {
  double z_tol = 1e-6;
  int supersample = 1;
  /// Optional pixel windows; when non-empty only pixels inside them are computed.
  std::vector<RegionOfInterest> roi;
  int workers = 1;
};

DiffractionPattern simulate_pattern(const IdealCrystal& crystal, const BeamColumn& column, const Probe& probe,
                                    const DetectorGrid& grid, const SpotShape& shape,
                                    const SimulationOptions& opt = {});

DiffractionPattern simulate_precessed(const IdealCrystal& crystal, const BeamColumn& column, const Probe& probe,
                                      const DetectorGrid& grid, const SpotShape& shape,
                                      const PrecessionConfig& prec, const SimulationOptions& opt = {});

DiffractionPattern simulate_high_energy(const IdealCrystal& crystal, const BeamColumn& column,
                                        const Probe& probe, const DetectorGrid& grid,
                                        const SimulationOptions& opt = {});

/// Convenience forms on a field column along e3; the spot shape uses the field voxel size.
DiffractionPattern simulate_pattern(const IdealCrystal& crystal, const DeformationField& field, int ix, int iy,
                                    const Probe& probe, const DetectorGrid& grid,
                                    const SimulationOptions& opt = {});
DiffractionPattern simulate_precessed(const IdealCrystal& crystal, const DeformationField& field, int ix, int iy,
                                      const Probe& probe, const DetectorGrid& grid,
                                      const PrecessionConfig& prec, const SimulationOptions& opt = {});
DiffractionPattern simulate_high_energy(const IdealCrystal& crystal, const DeformationField& field, int ix,
                                        int iy, const Probe& probe, const DetectorGrid& grid,
                                        const SimulationOptions& opt = {});

/// Phase and scale relating the transform of u(Ax + b) at K to that of u at A^-T K:
/// det(A)^-1 exp(i <b, A^-T K>).
cplx affine_fourier_factor(const Mat3& A, const Vec3& b, const Vec3& K);

}  // namespace sedtomo
