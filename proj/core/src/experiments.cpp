#include "sedtomo/experiments.hpp"

#include <cmath>
#include <sstream>

namespace sedtomo {

namespace {

BeamColumn identity_column(int nz, double voxel) {
  BeamColumn c;
  c.rho = voxel;
  for (int k = 0; k < nz; ++k) {
    c.A.push_back(Mat3::Identity());
    c.b.push_back(Vec3::Zero());
    c.z.push_back((k + 0.5) * voxel);
  }
  return c;
}

Probe make_probe(const ColumnStudyOptics& o) {
  Probe p;
  p.wavelength = o.wavelength;
  p.aperture = o.aperture;
  return p;
}

std::vector<Vec2> truth_from_mean(const Mat3& mean_A, const DiskSet& disks) {
  std::vector<Vec2> out;
  for (const Vec3& p : disks.peaks) out.push_back(in_plane(mean_A.transpose() * p));
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

}  // namespace

DiskSet study_disks(const IdealCrystal& crystal, double rbar) {
  return make_disk_set(crystal, inner_ring(crystal, 1e-9), rbar);
}

ColumnErrors measure_column(const IdealCrystal& crystal, const BeamColumn& column, const BeamColumn& reference,
                            const std::vector<Vec2>& c_true, const DiskSet& disks, double alpha,
                            const ColumnStudyOptics& optics) {
  const Probe probe = make_probe(optics);
  const DetectorGrid grid = DetectorGrid::covering(optics.k_max, optics.pitch);
  const SpotShape shape(probe, column.rho);
  SimulationOptions sim;
  sim.workers = optics.workers;
  const double window = disks.rbar + optics.max_shift + 2.0 * optics.pitch;
  for (const Vec2& q : disks.reference) sim.roi.push_back({q, window});
  const PrecessionConfig prec{alpha, optics.n_t};

  const DiffractionPattern pat = simulate_precessed(crystal, column, probe, grid, shape, prec, sim);
  const DiffractionPattern ref = simulate_precessed(crystal, reference, probe, grid, shape, prec, sim);

  const CentreMeasurement com = detect_com(pat, disks);
  const CentreMeasurement com_ref = detect_com(ref, disks);
  RegistrationOptions ro;
  ro.max_shift = optics.max_shift;
  const CentreMeasurement reg = detect_registered(pat, ref, disks, ro);

  ColumnErrors e;
  const std::size_t n = disks.reference.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& q = disks.reference[i];
    const Vec2 c_com = q + (com.centre[i] - com_ref.centre[i]);
    e.com += relative_error(c_true[i], c_com);
    e.registered += relative_error(c_true[i], reg.centre[i]);
    e.naive += relative_error(c_true[i], q);
  }
  e.com /= double(n);
  e.registered /= double(n);
  e.naive /= double(n);
  return e;
}

std::vector<LayeredStudyRow> run_layered_study(const LayeredStudyConfig& cfg,
                                               const std::function<void(const std::string&)>& log) {
  if (cfg.phantoms < 1 || cfg.layers.empty() || cfg.alphas.empty())
    throw PreconditionError("layered study needs phantoms, layer counts and angles");
  const ColumnStudyOptics& o = cfg.optics;
  const double voxel = o.thickness / o.nz;
  const IdealCrystal crystals[2] = {silicon(SiliconZone::Z001, o.cutoff, o.envelope_s),
                                    silicon(SiliconZone::Z011, o.cutoff, o.envelope_s)};
  const DiskSet disks[2] = {study_disks(crystals[0], o.rbar), study_disks(crystals[1], o.rbar)};
  const BeamColumn reference = identity_column(o.nz, voxel);

  Grid grid;
  grid.n = {1, 1, o.nz};
  grid.voxel = voxel;
  grid.origin = Vec3(0, 0, 0.5 * voxel);

  std::vector<LayeredStudyRow> rows;
  for (double a : cfg.alphas) rows.push_back({a, 0, 0, 0, {}});

  for (int n = 0; n < cfg.phantoms; ++n) {
    const int orient = n % 2;
    PhantomSpec ps;
    ps.L = cfg.layers[std::size_t(n) % cfg.layers.size()];
    ps.d = 1 + (n / int(cfg.layers.size())) % 3;
    ps.sigma = cfg.sigma;
    ps.seed = cfg.seed + std::uint64_t(n);
    ps.alignment = cfg.alignment;
    const DeformationField field = sample_layered_phantom(ps, grid);
    const BeamColumn column = column_from_field(field, 0, 0);
    Mat3 mean_A = Mat3::Zero();
    for (const Mat3& A : field.A) mean_A += A;
    mean_A /= double(field.A.size());
    const auto c_true = truth_from_mean(mean_A, disks[orient]);

    for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
      const ColumnErrors e =
          measure_column(crystals[orient], column, reference, c_true, disks[orient], cfg.alphas[ai], o);
      rows[ai].per_phantom.push_back(e);
      if (log) {
        std::ostringstream os;
        os << "phantom " << n << " L=" << ps.L << " d=" << ps.d << " zone=" << (orient ? "011" : "001")
           << " alpha=" << cfg.alphas[ai] * 180 / kPi << " com=" << e.com << " reg=" << e.registered
           << " naive=" << e.naive;
        log(os.str());
      }
    }
  }
  for (auto& r : rows) {
    std::vector<double> c, g, z;
    for (const auto& e : r.per_phantom) {
      c.push_back(e.com);
      g.push_back(e.registered);
      z.push_back(e.naive);
    }
    r.com = mean_of(c);
    r.registered = mean_of(g);
    r.naive = mean_of(z);
  }
  return rows;
}

std::vector<Vec2> default_dislocation_positions(const DislocationSpec& spec) {
  const Vec3 u = spec.line.normalized();
  const Vec2 along = Vec2(u.x(), u.y()).normalized();
  const Vec2 across(-along.y(), along.x());
  std::vector<Vec2> out;
  for (int i = 0; i < 5; ++i) {
    const double s = (i % 2 ? -1.0 : 1.0) * (30.0 + 15.0 * i);
    for (int k = -2; k <= 2; ++k) out.push_back(s * across + 20.0 * k * along);
  }
  return out;
}

DislocationStudyResult run_dislocation_study(const DislocationStudyConfig& cfg,
                                             const std::function<void(const std::string&)>& log) {
  const ColumnStudyOptics& o = cfg.optics;
  const double voxel = o.thickness / o.nz;
  DislocationSpec spec = cfg.spec;
  spec.core_point = Vec3(0, 0, 0.5 * o.thickness);
  spec.validate();
  const IdealCrystal crystal = silicon(SiliconZone::Z001, o.cutoff, o.envelope_s);
  const DiskSet disks = study_disks(crystal, o.rbar);
  const BeamColumn reference = identity_column(o.nz, voxel);

  DislocationStudyResult res;
  res.positions = cfg.positions.empty() ? default_dislocation_positions(spec) : cfg.positions;
  for (std::size_t n = 0; n < res.positions.size(); ++n) {
    const Vec2 xy = res.positions[n];
    Grid grid;
    grid.n = {1, 1, o.nz};
    grid.voxel = voxel;
    grid.origin = Vec3(xy.x(), xy.y(), 0.5 * voxel);
    const DeformationField field = dislocation_field(spec, grid, cfg.fd_step);
    const BeamColumn column = column_from_field(field, 0, 0);
    if (column.A.empty()) throw NoSupportError("dislocation column lies inside the core exclusion");
    const Mat3 mean_A =
        dislocation_mean_deformation(spec, xy, cfg.footprint, 0.0, o.thickness, cfg.fd_step);
    const auto c_true = truth_from_mean(mean_A, disks);
    const ColumnErrors e = measure_column(crystal, column, reference, c_true, disks, cfg.alpha, o);
    res.per_position.push_back(e);
    if (log) {
      std::ostringstream os;
      os << "position (" << xy.x() << ", " << xy.y() << ") com=" << e.com << " reg=" << e.registered
         << " naive=" << e.naive;
      log(os.str());
    }
  }
  for (const auto& e : res.per_position) {
    res.com += e.com;
    res.registered += e.registered;
    res.naive += e.naive;
  }
  const double n = double(res.per_position.size());
  res.com /= n;
  res.registered /= n;
  res.naive /= n;
  return res;
}

}  // namespace sedtomo
