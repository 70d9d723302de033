#pragma once

#include "sedtomo/common.hpp"
#include "sedtomo/tomo.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace sedtomo {

struct ReconConfig {
  double beta = 5e-5;  // TV weight
  int max_iters = 2000;
  double tolerance = 1e-6;
  std::uint64_t noise_seed = 0;
  double noise_level = 0.0;
  int log_every = 10;
  int workers = 0;
};

/// Gaussian noise scaled by level times the RMS entry of the valid rays, projected by Pi on both sides.
TensorSinogram add_noise(const TensorSinogram& d, const AcquisitionGeometry& geom, double level, std::uint64_t seed);

struct IterationRecord {
  int iteration;
  double objective;
  double data_residual;  // |JF - d| / |d| over valid rays
  double relative_change;
};

struct ReconResult {
  TensorVolume F;
  std::vector<IterationRecord> history;
  int iterations = 0;
  bool converged = false;
  double operator_norm = 0.0;
};

/// Primal-dual minimisation of 1/2 sum pitch^2 |JF - d|^2 + beta sum h^3 |grad F|_Frobenius,
/// with F pinned to zero outside `support` (empty = everywhere free).
ReconResult reconstruct_tv(const TensorSinogram& d, const RayOperator& op, const ReconConfig& cfg,
                           const std::vector<std::uint8_t>& support = {});
ReconResult reconstruct_tv(const TensorSinogram& d, const AcquisitionGeometry& geom, const Grid& grid,
                           const ReconConfig& cfg, const std::vector<std::uint8_t>& support = {});

/// TV weight in the grid's length units for a weight posed on the box rescaled so its largest
/// half-extent is 1.
double box_beta(double beta, const Grid& grid);

/// Objective value of reconstruct_tv for a given volume.
double tv_objective(const TensorSinogram& d, const RayOperator& op, const std::vector<Mat3>& F, double beta);

/// Forward-difference gradient (Neumann) divided by h; three tensors per voxel.
void tensor_gradient(const Grid& g, const std::vector<Mat3>& F, std::vector<std::array<Mat3, 3>>& out);
/// Negative adjoint of tensor_gradient.
void tensor_divergence(const Grid& g, const std::vector<std::array<Mat3, 3>>& p, std::vector<Mat3>& out);

enum class StrainConvention { Arithmetic, Geometric };

TensorVolume extract_strain(const TensorVolume& F, StrainConvention convention);

struct ComponentStats {
  double p50 = 0, p99 = 0, max = 0;
};

struct ErrorReport {
  std::vector<Mat3> abs_error;          // |recon - truth| per voxel
  std::vector<Mat3> abs_sym_error;      // |Sym(recon) - Sym(truth)| per voxel
  std::array<ComponentStats, 9> full;   // row-major components
  std::array<ComponentStats, 6> sym;    // xx, yy, zz, xy, xz, yz
  std::vector<double> profile_z;        // mean over x,y of the max component error, per z slice
  std::vector<double> projection_xz;    // the same averaged over y, indexed [x * nz + z]
};

/// Percentile by linear interpolation between order statistics; q in [0, 100].
double percentile(std::vector<double> values, double q);

ErrorReport error_report(const TensorVolume& recon, const TensorVolume& truth,
                         const std::vector<std::uint8_t>& region = {});

}  // namespace sedtomo
