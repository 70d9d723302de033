#pragma once

#include "sedtomo/crystal.hpp"
#include "sedtomo/deformation.hpp"
#include "sedtomo/diffraction.hpp"
#include "sedtomo/peaks.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sedtomo {

/// Shared optics and detection settings for the single-column error studies.
struct ColumnStudyOptics {
  double wavelength = 0.02;
  double aperture = 0.0;      // 0: 2 mrad
  double thickness = 250.0;   // Å
  int nz = 10;                // voxels along the beam
  double cutoff = 5.0;        // peak cutoff, Å⁻¹
  double envelope_s = 2.5;
  double pitch = 0.02;        // detector pitch, Å⁻¹
  double k_max = 6.0;
  double rbar = 0.8;          // detection window radius
  double max_shift = 0.1;     // registration search radius
  int n_t = 32;
  int workers = 0;
};

/// Relative errors (percent) of one measured column, averaged over its disks.
struct ColumnErrors {
  double com = 0.0;
  double registered = 0.0;
  double naive = 0.0;  // c = q
};

/// Simulates a precessed column and its undeformed reference, detects disk centres with both
/// methods and scores them against c_true. Centre-of-mass centres are corrected by the offset the
/// same method finds on the reference.
ColumnErrors measure_column(const IdealCrystal& crystal, const BeamColumn& column, const BeamColumn& reference,
                            const std::vector<Vec2>& c_true, const DiskSet& disks, double alpha,
                            const ColumnStudyOptics& optics);

struct LayeredStudyConfig {
  ColumnStudyOptics optics;
  std::vector<double> alphas{0.0, 0.5 * kPi / 180, 1.0 * kPi / 180, 2.0 * kPi / 180};
  int phantoms = 30;
  std::vector<int> layers{1, 3, 10};
  double sigma = 0.01;
  Alignment alignment = Alignment::Continuity;
  std::uint64_t seed = 1;
};

struct LayeredStudyRow {
  double alpha;
  double com, registered, naive;  // mean percent error over phantoms and disks
  std::vector<ColumnErrors> per_phantom;
};

/// Phantom n uses L = layers[n % |layers|], d = 1 + (n / |layers|) % 3, zone [001] for even n and
/// [011] for odd n, seed + n. The same phantoms are used for every alpha.
std::vector<LayeredStudyRow> run_layered_study(const LayeredStudyConfig& cfg,
                                               const std::function<void(const std::string&)>& log = {});

struct DislocationStudyConfig {
  ColumnStudyOptics optics;
  double alpha = 2.0 * kPi / 180;
  DislocationSpec spec;          // core_point is overridden to the slab centre
  double footprint = 30.0;       // lateral averaging window for c_true, Å
  double fd_step = 0.25;         // Å
  std::vector<Vec2> positions;   // empty: the default 25 positions
};

struct DislocationStudyResult {
  std::vector<Vec2> positions;
  std::vector<ColumnErrors> per_position;
  double com = 0.0, registered = 0.0, naive = 0.0;
};

/// Default scan positions: 5 offsets across the line (alternating sides, 30 to 90 Å) by 5 along it.
std::vector<Vec2> default_dislocation_positions(const DislocationSpec& spec);

DislocationStudyResult run_dislocation_study(const DislocationStudyConfig& cfg,
                                             const std::function<void(const std::string&)>& log = {});

/// Disk set used by the studies: the zero-order inner ring with the configured window radius.
DiskSet study_disks(const IdealCrystal& crystal, double rbar);

}  // namespace sedtomo
