#pragma once

#include "sedtomo/common.hpp"
#include "sedtomo/grid.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace sedtomo {

/// Piece-wise affine crystal: voxel j holds u0(A_j x + b_j).
struct DeformationField {
  Grid grid;
  std::vector<Mat3> A;
  std::vector<Vec3> b;  // Å
  std::vector<std::uint8_t> support;

  static DeformationField identity(const Grid& grid);
  Vec3 beta(std::size_t j) const { return grid.centre(j); }
  std::size_t size() const { return grid.size(); }
};

enum class Alignment { Zero, Continuity };

struct PhantomSpec {
  int L = 1;
  int d = 1;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  Alignment alignment = Alignment::Continuity;
};

/// Mean spectral norm of the unscaled rank-d perturbation (entries uniform on [-1,1]).
double phantom_norm_constant(int d);

/// Random perturbation with ensemble-mean spectral norm 1.
Mat3 sample_perturbation(int d, std::mt19937_64& rng);

/// Layer boundaries in z: slab l covers [first[l], first[l+1]).
std::vector<int> layer_starts(int nz, int L);

DeformationField sample_layered_phantom(const PhantomSpec& spec, const Grid& grid);

struct DislocationSpec {
  Vec3 burgers = 0.5 * 5.431 * Vec3(1, 1, 1);
  Vec3 line = Vec3(1, -1, 0);
  double nu = 0.3;
  double core_exclusion_radius = 10.0;  // Å
  Vec3 core_point = Vec3::Zero();       // a point on the dislocation line
  bool subtract_position = false;       // literal "- x" variant of the displacement

  void validate() const;
};

struct Cylindrical {
  double r, phi, Z;
};

/// Orthonormal basis (u x b, (u x b) x u, u) as columns.
Mat3 dislocation_basis(const DislocationSpec& spec);

Cylindrical dislocation_coordinates(const DislocationSpec& spec, const Vec3& x);

/// Displacement R(x) with the branch cut of phi at pi. phi_ref selects the branch
/// nearest to it when finite; used to difference across the cut.
Vec3 dislocation_displacement(const DislocationSpec& spec, const Vec3& x,
                              double phi_ref = std::numeric_limits<double>::quiet_NaN());

/// Central-difference gradient G(i,k) = dR_i/dx_k at step h.
Mat3 dislocation_gradient(const DislocationSpec& spec, const Vec3& x, double h);

/// A = id + grad R, b = R(beta) - grad R(beta) beta per voxel; core voxels leave the support.
DeformationField dislocation_field(const DislocationSpec& spec, const Grid& grid, double h);

struct Decomposition {
  std::vector<Mat3> sym;
  std::vector<Vec3> skew;
};

/// Splits A - id into Sym + [f]x per voxel.
Decomposition decompose(const DeformationField& field);
Decomposition decompose(const std::vector<Mat3>& F);

/// gamma^T M : first two components.
inline Vec2 in_plane(const Vec3& v) { return v.head<2>(); }

/// Mean over supported voxels of column (ix, iy) of gamma^T A_j^T p.
Vec2 beam_average_truth(const DeformationField& field, int ix, int iy, const Vec3& p);

/// Mean of A = id + grad R over a square footprint x [z0, z0 + T], by midpoint quadrature.
Mat3 dislocation_mean_deformation(const DislocationSpec& spec, const Vec2& centre, double footprint,
                                  double z0, double thickness, double h, int nxy = 12, int nz = 50);

}  // namespace sedtomo
