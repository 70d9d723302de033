#pragma once

#include "sedtomo/crystal.hpp"
#include "sedtomo/deformation.hpp"
#include "sedtomo/diffraction.hpp"
#include "sedtomo/peaks.hpp"
#include "sedtomo/recon.hpp"
#include "sedtomo/tomo.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sedtomo {

struct CrystalSpec {
  enum class Source { SiliconPreset, Direct, Reciprocal };
  Source source = Source::SiliconPreset;
  SiliconZone zone = SiliconZone::Z001;
  Mat3 basis = Mat3::Identity();  // columns; Å for Direct, Å⁻¹ for Reciprocal
  WeightModel weights;
  double cutoff = 5.0;

  IdealCrystal build() const;
};

struct PhantomConfig {
  enum class Type { Layered, Dislocation };
  Type type = Type::Layered;
  Grid grid;
  PhantomSpec layered;
  DislocationSpec dislocation;
  double fd_step = 0.0;  // 0: voxel / 100

  DeformationField build() const;
};

struct GeometrySpec {
  double tilt_limit = 70.0 * kPi / 180.0;
  int max_index = 1;
  std::vector<Vec3> directions;  // explicit directions override the zone-axis search
  ScanGrid scan;
  bool scan_pitch_from_voxel = true;

  AcquisitionGeometry build(const IdealCrystal& crystal, const Grid& grid) const;
};

struct DetectionSpec {
  std::vector<CentreMethod> methods{CentreMethod::CentreOfMass, CentreMethod::Registered};
  double rbar = 0.0;
  double max_shift = 0.1;
  bool subpixel = true;
};

struct PipelineConfig {
  CrystalSpec crystal;
  PhantomConfig phantom;
  Probe probe;
  DetectorGrid detector{301, 301, 0.03};
  std::vector<double> alphas{0.0};  // radians
  int n_t = 32;
  GeometrySpec geometry;
  DetectionSpec detection;
  ReconConfig recon;
  std::string output = "out";
  int workers = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses a JSON document; sub-objects "crystal", "phantom" and "geometry" may be given as {"file": path},
/// resolved relative to base_dir.
PipelineConfig parse_pipeline_config(const std::string& text, const std::string& base_dir = ".");
PipelineConfig load_pipeline_config(const std::string& path);

CrystalSpec load_crystal_spec(const std::string& path);
PhantomConfig load_phantom_config(const std::string& path);
GeometrySpec load_geometry_spec(const std::string& path);

/// Geometry as resolved directions (round-trips through load_acquisition).
/// The optional grid records the reconstruction volume alongside the geometry.
std::string dump_acquisition(const AcquisitionGeometry& g, const Grid* grid = nullptr);
AcquisitionGeometry load_acquisition(const std::string& path);
std::optional<Grid> load_acquisition_grid(const std::string& path);

}  // namespace sedtomo
