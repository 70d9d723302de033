#pragma once

#include "sedtomo/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sedtomo {

/// Crystal seen down a tilt: peaks expressed in the beam frame [e_u e_v xi].
IdealCrystal tilted_crystal(const IdealCrystal& crystal, const Tilt& tilt);

/// Zero-order disks on the smallest rings that give two non-colinear centres and fit on the detector.
/// Throws PreconditionError when no such set exists.
DiskSet tilt_disk_set(const IdealCrystal& tilted, const DetectorGrid& grid, double rbar);

/// Chord length of the supported sample along every ray.
std::vector<double> thickness_map(const DeformationField& field, const AcquisitionGeometry& geom, int workers = 0);

/// Projected deformation minus the identity on the beam plane: embed(M2) - Pi.
Mat3 projected_average(const Mat2& t2, const Tilt& tilt);

/// Transposed displacement gradient A^T - id, the quantity the detected centres project.
TensorVolume measured_gradient(const DeformationField& field);
/// Displacement gradient A - id.
TensorVolume displacement_gradient(const DeformationField& field);

/// Inputs and outputs default to conventional names inside the output directory.
struct CommandPaths {
  std::filesystem::path out = "out";
  std::string phantom, truth, geometry, sinogram, recon, support;

  std::filesystem::path phantom_or_default() const;
  std::filesystem::path truth_or_default() const;
  std::filesystem::path geometry_or_default() const;
  std::filesystem::path recon_or_default() const;
};

std::string alpha_tag(double alpha);

void cmd_phantom(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);
void cmd_simulate(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);
void cmd_detect(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);
void cmd_project(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);
void cmd_reconstruct(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);
void cmd_evaluate(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);
void cmd_pipeline(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log);

}  // namespace sedtomo
