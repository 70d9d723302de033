#pragma once

#include "sedtomo/common.hpp"
#include "sedtomo/crystal.hpp"
#include "sedtomo/grid.hpp"

#include <cstdint>
#include <vector>

namespace sedtomo {

template <class T>
struct Volume {
  Grid grid;
  std::vector<T> data;

  Volume() = default;
  explicit Volume(const Grid& g, const T& fill) : grid(g), data(g.size(), fill) {}
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  std::size_t size() const { return data.size(); }
};

using TensorVolume = Volume<Mat3>;
using VectorVolume = Volume<Vec3>;
using ScalarVolume = Volume<double>;

inline TensorVolume zero_tensor_volume(const Grid& g) { return TensorVolume(g, Mat3::Zero()); }

struct Tilt {
  Vec3 xi;
  Vec3 eu, ev;

  /// Columns e_u, e_v, xi.
  Mat3 frame() const;
  Mat32 plane() const;
};

/// Frame by Gram-Schmidt of e1 (e2 near the e1 pole) against xi.
Tilt make_tilt(const Vec3& direction);

/// Rays sit at centre + (a - (nu-1)/2) pitch e_u + (b - (nv-1)/2) pitch e_v.
struct ScanGrid {
  int nu = 1;
  int nv = 1;
  double pitch = 1.0;

  std::size_t size() const { return std::size_t(nu) * std::size_t(nv); }
  double u(int a) const { return (a - 0.5 * (nu - 1)) * pitch; }
  double v(int b) const { return (b - 0.5 * (nv - 1)) * pitch; }
};

struct AcquisitionGeometry {
  std::vector<Tilt> tilts;
  ScanGrid scan;
  Vec3 centre = Vec3::Zero();
  double tilt_limit = kPi / 2;

  std::size_t rays() const { return tilts.size() * scan.size(); }
  std::size_t ray_index(std::size_t tilt, int a, int b) const {
    return (tilt * std::size_t(scan.nu) + std::size_t(a)) * std::size_t(scan.nv) + std::size_t(b);
  }
  /// Point on ray r closest to the centre.
  Vec3 ray_origin(std::size_t r) const;
  const Tilt& ray_tilt(std::size_t r) const { return tilts[r / scan.size()]; }
  void validate() const;
};

struct TensorSinogram {
  std::size_t n_tilts = 0;
  int nu = 0, nv = 0;
  std::vector<Mat3> data;
  std::vector<std::uint8_t> mask;  // 1 = measured

  static TensorSinogram zeros(const AcquisitionGeometry& g);
  std::size_t size() const { return data.size(); }
  bool conforms(const AcquisitionGeometry& g) const;
};

struct ScalarSinogram {
  std::size_t n_tilts = 0;
  int nu = 0, nv = 0;
  std::vector<double> data;
};

/// Sample positions t = m step along the ray that lie in the interpolation support of the grid.
struct RaySamples {
  double step;
  long m0, m1;  // inclusive range
};
RaySamples ray_samples(const Grid& grid, const Vec3& origin, const Vec3& xi);

/// Trilinear weights with zero padding: up to 8 (index, weight) pairs.
int trilinear(const Grid& grid, const Vec3& x, std::size_t idx[8], double w[8]);

/// Matrix-free transverse ray transform.
TensorSinogram trt_forward(const TensorVolume& F, const AcquisitionGeometry& geom, int workers = 0);
TensorVolume trt_adjoint(const TensorSinogram& d, const AcquisitionGeometry& geom, const Grid& grid,
                         int workers = 0);

ScalarSinogram lrt_forward(const VectorVolume& f, const AcquisitionGeometry& geom, int workers = 0);

/// Integral of a scalar volume along each ray with the same quadrature.
ScalarSinogram ray_integrals(const ScalarVolume& s, const AcquisitionGeometry& geom, int workers = 0);

/// Sparse ray/voxel weights assembled once; forward and adjoint are exact transposes.
class RayOperator {
 public:
  RayOperator(const Grid& grid, const AcquisitionGeometry& geom, int workers = 0);

  TensorSinogram forward(const TensorVolume& F) const;
  TensorVolume adjoint(const TensorSinogram& d) const;
  /// Raw forms on flat arrays; out is overwritten. Projections are applied per ray.
  void forward(const std::vector<Mat3>& F, std::vector<Mat3>& out) const;
  void adjoint(const std::vector<Mat3>& d, const std::vector<std::uint8_t>& mask, std::vector<Mat3>& out) const;

  const Grid& grid() const { return grid_; }
  const AcquisitionGeometry& geometry() const { return geom_; }
  std::size_t nnz() const { return col_.size(); }
  const std::vector<Mat3>& projectors() const { return proj_; }

 private:
  Grid grid_;
  AcquisitionGeometry geom_;
  int workers_;
  std::vector<Mat3> proj_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
  std::vector<std::size_t> t_ptr_;
  std::vector<std::uint32_t> t_row_;
  std::vector<double> t_val_;
};

/// Central-difference gradient (zero outside the grid) mapped pointwise to [grad phi]x.
TensorVolume gauge_field(const ScalarVolume& phi);

/// Directions n1 a + n2 b + n3 c with |n_i| <= max_index within tilt_limit of e3, up to sign,
/// sorted by tilt angle then azimuth.
std::vector<Vec3> zone_axis_directions(const DirectLattice& lattice, double tilt_limit, int max_index);

AcquisitionGeometry zone_axis_geometry(const IdealCrystal& crystal, double tilt_limit, int max_index,
                                       const ScanGrid& scan, const Vec3& centre = Vec3::Zero());

/// Stereographic coordinates of the direction's lower-hemisphere representative: e3 maps to (0,0).
Vec2 stereographic(const Vec3& direction);

/// Quasi-uniform directions on the upper hemisphere (Fibonacci lattice).
std::vector<Vec3> fibonacci_directions(int n);

TensorSinogram thickness_rescale(const TensorSinogram& averages, const std::vector<double>& thickness);

}  // namespace sedtomo
