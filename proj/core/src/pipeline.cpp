#include "sedtomo/pipeline.hpp"

#include "sedtomo/parallel.hpp"
#include "sedtomo/raster.hpp"
#include "sedtomo/tvf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <iomanip>
#include <ostream>

namespace sedtomo {

namespace fs = std::filesystem;

namespace {

constexpr double kDeg = kPi / 180.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw FormatError("cannot open " + p.string() + " for writing");
  os << std::setprecision(10);
  return os;
}

fs::path in_out(const CommandPaths& paths, const std::string& given, const char* name) {
  return given.empty() ? paths.out / name : fs::path(given);
}

void require(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

DeformationField load_phantom(const CommandPaths& paths) {
  const fs::path p = paths.phantom_or_default();
  require(p, "phantom file");
  return deformation_from(read_tvf(p.string()));
}

Grid acquisition_grid(const CommandPaths& paths) {
  const fs::path g = paths.geometry_or_default();
  require(g, "geometry file");
  if (auto grid = load_acquisition_grid(g.string())) return *grid;
  return load_phantom(paths).grid;
}

std::string method_tag(CentreMethod m) { return m == CentreMethod::CentreOfMass ? "com" : "registered"; }

fs::path patterns_file(const fs::path& out, double alpha) { return out / ("patterns_" + alpha_tag(alpha) + ".tvf"); }
fs::path references_file(const fs::path& out, double alpha) {
  return out / ("references_" + alpha_tag(alpha) + ".tvf");
}
fs::path sinogram_file(const fs::path& out, CentreMethod m, double alpha) {
  return out / ("sinogram_" + method_tag(m) + "_" + alpha_tag(alpha) + ".tvf");
}

DeformationField identity_like(const DeformationField& field) {
  DeformationField id = DeformationField::identity(field.grid);
  id.support = field.support;
  return id;
}

PipelineConfig with_seeded_phantom(const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  c.phantom.layered.seed = cfg.phantom.layered.seed + cfg.seed;
  return c;
}

Image slice_xz(const TensorVolume& v, int j, bool max_abs) {
  const Grid& g = v.grid;
  Image img{g.n[0], g.n[2], std::vector<double>(std::size_t(g.n[0]) * std::size_t(g.n[2]))};
  for (int i = 0; i < g.n[0]; ++i)
    for (int k = 0; k < g.n[2]; ++k) {
      const Mat3& m = v[g.index(i, j, k)];
      img.at(i, g.n[2] - 1 - k) = max_abs ? m.cwiseAbs().maxCoeff() : m.norm();
    }
  return img;
}

}  // namespace

IdealCrystal tilted_crystal(const IdealCrystal& crystal, const Tilt& tilt) {
  const Mat3 Rt = tilt.frame().transpose();
  IdealCrystal out = crystal;
  out.reciprocal = rotate(crystal.reciprocal, Rt);
  for (Peak& p : out.peaks) p.p = Rt * p.p;
  return out;
}

DiskSet tilt_disk_set(const IdealCrystal& tilted, const DetectorGrid& grid, double rbar) {
  std::vector<long> zolz;
  for (std::size_t i = 0; i < tilted.peaks.size(); ++i) {
    const Vec3& p = tilted.peaks[i].p;
    if (p.norm() > 1e-12 && std::abs(p.z()) <= 1e-8 * (1.0 + p.norm()) && std::abs(tilted.peaks[i].w) > 0.0)
      zolz.push_back(long(i));
  }
  std::vector<long> chosen;
  const auto rank_two = [&](const std::vector<long>& idx) {
    Mat2 Q = Mat2::Zero();
    double tr = 0.0;
    for (long i : idx) {
      const Vec2 q = tilted.peaks[std::size_t(i)].p.head<2>();
      Q += q * q.transpose();
      tr += q.squaredNorm();
    }
    return tr > 0.0 && Q.determinant() > 1e-6 * tr * tr;
  };
  std::size_t k = 0;
  while (k < zolz.size()) {
    const double r = tilted.peaks[std::size_t(zolz[k])].p.norm();
    while (k < zolz.size() && tilted.peaks[std::size_t(zolz[k])].p.norm() <= r * (1.0 + 1e-9)) chosen.push_back(zolz[k++]);
    if (rank_two(chosen)) break;
  }
  if (!rank_two(chosen)) throw PreconditionError("no two non-colinear zero-order disks for this tilt");
  DiskSet disks = make_disk_set(tilted, chosen, rbar);
  const double limit = grid.k_max() - grid.pitch;
  for (const Vec2& q : disks.reference)
    if (std::abs(q.x()) + disks.rbar > limit || std::abs(q.y()) + disks.rbar > limit)
      throw PreconditionError("zero-order disks do not fit on the detector");
  return disks;
}

std::vector<double> thickness_map(const DeformationField& field, const AcquisitionGeometry& geom, int workers) {
  ScalarVolume s(field.grid, 0.0);
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = field.support[j] ? 1.0 : 0.0;
  auto t = ray_integrals(s, geom, workers).data;
  for (double& v : t)
    if (v < 1e-9 * field.grid.voxel) v = 0.0;
  return t;
}

Mat3 projected_average(const Mat2& t2, const Tilt& tilt) {
  const Mat32 P = tilt.plane();
  return embed_projection(t2, tilt.xi, P) - P * P.transpose();
}

TensorVolume measured_gradient(const DeformationField& field) {
  TensorVolume v(field.grid, Mat3::Zero());
  for (std::size_t j = 0; j < v.size(); ++j)
    if (field.support[j]) v[j] = field.A[j].transpose() - Mat3::Identity();
  return v;
}

TensorVolume displacement_gradient(const DeformationField& field) {
  TensorVolume v(field.grid, Mat3::Zero());
  for (std::size_t j = 0; j < v.size(); ++j)
    if (field.support[j]) v[j] = field.A[j] - Mat3::Identity();
  return v;
}

fs::path CommandPaths::phantom_or_default() const { return in_out(*this, phantom, "phantom.tvf"); }
fs::path CommandPaths::truth_or_default() const { return in_out(*this, truth, "truth.tvf"); }
fs::path CommandPaths::geometry_or_default() const { return in_out(*this, geometry, "geometry.json"); }
fs::path CommandPaths::recon_or_default() const { return in_out(*this, recon, "recon.tvf"); }

std::string alpha_tag(double alpha) {
  const double deg = std::round(alpha / kDeg * 1e6) / 1e6;
  return "a" + format_double(deg);
}

void cmd_phantom(const PipelineConfig& cfg_in, const CommandPaths& paths, std::ostream& log) {
  const PipelineConfig cfg = with_seeded_phantom(cfg_in);
  fs::create_directories(paths.out);
  const auto t0 = Clock::now();
  const DeformationField field = cfg.phantom.build();
  write_tvf(paths.phantom_or_default().string(), to_tvf(field));
  write_tvf(paths.truth_or_default().string(), to_tvf(displacement_gradient(field)));
  const auto supported = std::count(field.support.begin(), field.support.end(), std::uint8_t(1));
  log << "phantom: " << field.grid.n[0] << "x" << field.grid.n[1] << "x" << field.grid.n[2] << " voxels, "
      << supported << " supported, " << seconds_since(t0) << " s\n";
}

void cmd_simulate(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log) {
  fs::create_directories(paths.out);
  const DeformationField field = load_phantom(paths);
  const DeformationField reference_field = identity_like(field);
  const IdealCrystal crystal = cfg.crystal.build();
  const AcquisitionGeometry geom = cfg.geometry.build(crystal, field.grid);
  {
    std::ofstream os = open_out(paths.geometry_or_default());
    os << dump_acquisition(geom, &field.grid) << "\n";
  }
  const SpotShape shape(cfg.probe, field.grid.voxel);
  const int workers = resolve_workers(cfg.workers);
  std::ofstream timing = open_out(paths.out / "simulate_log.csv");
  timing << "alpha_deg,tilt,a,b,voxels,seconds,truncated\n";
  log << "simulate: " << geom.tilts.size() << " tilts x " << geom.scan.size() << " positions, detector "
      << cfg.detector.nx << "x" << cfg.detector.ny << ", " << workers << " workers\n";

  for (double alpha : cfg.alphas) {
    const PrecessionConfig prec{alpha, cfg.n_t};
    const std::size_t n = geom.rays();
    std::vector<DiffractionPattern> patterns(n);
    std::vector<double> secs(n, 0.0);
    std::vector<std::size_t> voxels(n, 0);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end, int) {
      SimulationOptions opt;
      opt.workers = 1;
      for (std::size_t r = begin; r < end; ++r) {
        const auto t0 = Clock::now();
        const std::size_t t = r / geom.scan.size();
        const int a = int((r % geom.scan.size()) / std::size_t(geom.scan.nv));
        const int b = int(r % std::size_t(geom.scan.nv));
        const BeamColumn col = column_along_ray(field, geom.tilts[t].frame(), geom.scan.u(a), geom.scan.v(b), geom.centre);
        patterns[r] = simulate_precessed(crystal, col, cfg.probe, cfg.detector, shape, prec, opt);
        voxels[r] = col.A.size();
        secs[r] = seconds_since(t0);
      }
    });
    // Zero-strain reference per ray; rays with the same column layout share one simulation.
    std::map<std::vector<long long>, std::size_t> layout;
    std::vector<std::size_t> ref_of(n);
    std::vector<BeamColumn> unique_cols;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t t = r / geom.scan.size();
      const int a = int((r % geom.scan.size()) / std::size_t(geom.scan.nv));
      const int b = int(r % std::size_t(geom.scan.nv));
      BeamColumn col = column_along_ray(reference_field, geom.tilts[t].frame(), geom.scan.u(a), geom.scan.v(b), geom.centre);
      std::vector<long long> key{(long long)t};
      for (std::size_t k = 0; k < col.z.size(); ++k) {
        key.push_back(std::llround(col.z[k] * 1e6));
        for (int c = 0; c < 3; ++c) key.push_back(std::llround(col.b[k][c] * 1e6));
      }
      const auto [it, fresh] = layout.emplace(std::move(key), unique_cols.size());
      if (fresh) unique_cols.push_back(std::move(col));
      ref_of[r] = it->second;
    }
    std::vector<DiffractionPattern> unique_refs(unique_cols.size());
    parallel_for(unique_cols.size(), workers, [&](std::size_t begin, std::size_t end, int) {
      SimulationOptions opt;
      opt.workers = 1;
      for (std::size_t u = begin; u < end; ++u)
        unique_refs[u] = simulate_precessed(crystal, unique_cols[u], cfg.probe, cfg.detector, shape, prec, opt);
    });
    std::vector<DiffractionPattern> refs(n);
    for (std::size_t r = 0; r < n; ++r) refs[r] = unique_refs[ref_of[r]];
    write_tvf(patterns_file(paths.out, alpha).string(), to_tvf(patterns));
    write_tvf(references_file(paths.out, alpha).string(), to_tvf(refs));
    double total = 0.0;
    std::size_t truncated = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t t = r / geom.scan.size();
      timing << alpha / kDeg << ',' << t << ',' << (r % geom.scan.size()) / std::size_t(geom.scan.nv) << ','
             << r % std::size_t(geom.scan.nv) << ',' << voxels[r] << ',' << secs[r] << ','
             << int(patterns[r].truncated) << '\n';
      total += secs[r];
      truncated += patterns[r].truncated ? 1 : 0;
    }
    log << "  alpha " << alpha / kDeg << " deg: " << n << " patterns, mean " << total / double(n)
        << " s/pattern" << (truncated ? ", " + std::to_string(truncated) + " truncated by the detector" : "")
        << "\n";
  }
}

void cmd_detect(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log) {
  const DeformationField field = load_phantom(paths);
  const fs::path gpath = paths.geometry_or_default();
  require(gpath, "geometry file");
  const AcquisitionGeometry geom = load_acquisition(gpath.string());
  const IdealCrystal crystal = cfg.crystal.build();
  const int workers = resolve_workers(cfg.workers);
  const std::vector<double> thickness = thickness_map(field, geom, workers);

  std::vector<IdealCrystal> tilted;
  std::vector<std::optional<DiskSet>> disks;
  for (const Tilt& t : geom.tilts) {
    tilted.push_back(tilted_crystal(crystal, t));
    try {
      disks.emplace_back(tilt_disk_set(tilted.back(), cfg.detector, cfg.detection.rbar));
    } catch (const PreconditionError& e) {
      log << "detect: tilt (" << t.xi.transpose() << ") masked: " << e.what() << "\n";
      disks.emplace_back(std::nullopt);
    }
  }

  std::ofstream summary = open_out(paths.out / "detect_summary.csv");
  summary << "alpha_deg,method,mean_relative_error_percent,naive_percent,measured_rays,rays\n";
  log << "detect: mean relative error (percent)\n";
  log << "  alpha_deg  method       error     naive     rays\n";

  RegistrationOptions ro;
  ro.max_shift = cfg.detection.max_shift;
  ro.subpixel = cfg.detection.subpixel;

  for (double alpha : cfg.alphas) {
    require(patterns_file(paths.out, alpha), "pattern set");
    const auto patterns = pattern_set_from(read_tvf(patterns_file(paths.out, alpha).string()));
    const auto refs = pattern_set_from(read_tvf(references_file(paths.out, alpha).string()));
    if (patterns.size() != geom.rays() || refs.size() != geom.rays())
      throw ShapeMismatchError("pattern set does not match the geometry");

    for (CentreMethod method : cfg.detection.methods) {
      TensorSinogram avg = TensorSinogram::zeros(geom);
      std::vector<std::vector<Vec2>> centres(geom.rays()), truth(geom.rays());
      parallel_for(geom.rays(), workers, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t r = begin; r < end; ++r) {
          const std::size_t t = r / geom.scan.size();
          avg.mask[r] = 0;
          if (!disks[t] || thickness[r] == 0.0) continue;
          const DiskSet& ds = *disks[t];
          try {
            std::vector<Vec2> c;
            if (method == CentreMethod::CentreOfMass) {
              const auto m = detect_com(patterns[r], ds);
              const auto m0 = detect_com(refs[r], ds);
              for (std::size_t i = 0; i < ds.reference.size(); ++i)
                c.push_back(ds.reference[i] + m.centre[i] - m0.centre[i]);
            } else {
              c = detect_registered(patterns[r], refs[r], ds, ro).centre;
            }
            avg.data[r] = projected_average(centres_to_tensor(c, ds), geom.tilts[t]);
            avg.mask[r] = 1;
            centres[r] = std::move(c);
          } catch (const Error&) {
            continue;
          }
          const int a = int((r % geom.scan.size()) / std::size_t(geom.scan.nv));
          const int b = int(r % std::size_t(geom.scan.nv));
          const BeamColumn col =
              column_along_ray(field, geom.tilts[t].frame(), geom.scan.u(a), geom.scan.v(b), geom.centre);
          if (col.A.empty()) continue;
          for (long idx : ds.index) {
            const Vec3& p = crystal.peaks[std::size_t(idx)].p;
            Vec2 s = Vec2::Zero();
            for (const Mat3& A : col.A) s += in_plane(A.transpose() * p);
            truth[r].push_back(s / double(col.A.size()));
          }
        }
      });

      const TensorSinogram sino = thickness_rescale(avg, thickness);
      write_tvf(sinogram_file(paths.out, method, alpha).string(), to_tvf(sino));

      std::ofstream csv =
          open_out(paths.out / ("centres_" + method_tag(method) + "_" + alpha_tag(alpha) + ".csv"));
      csv << "tilt,a,b,disk,h,k,l,qx,qy,cx,cy,true_x,true_y,relative_error_percent\n";
      double err = 0.0, naive = 0.0;
      std::size_t n_err = 0, measured = 0;
      for (std::size_t r = 0; r < geom.rays(); ++r) {
        if (!sino.mask[r]) continue;
        ++measured;
        const std::size_t t = r / geom.scan.size();
        const DiskSet& ds = *disks[t];
        for (std::size_t i = 0; i < ds.reference.size(); ++i) {
          const Miller& hkl = crystal.peaks[std::size_t(ds.index[i])].hkl;
          const Vec2& c = centres[r][i];
          csv << t << ',' << (r % geom.scan.size()) / std::size_t(geom.scan.nv) << ','
              << r % std::size_t(geom.scan.nv) << ',' << i << ',' << hkl[0] << ',' << hkl[1] << ',' << hkl[2]
              << ',' << ds.reference[i].x() << ',' << ds.reference[i].y() << ',' << c.x() << ',' << c.y();
          if (truth[r].size() == ds.reference.size()) {
            const double e = relative_error(truth[r][i], c);
            csv << ',' << truth[r][i].x() << ',' << truth[r][i].y() << ',' << e << '\n';
            err += e;
            naive += relative_error(truth[r][i], ds.reference[i]);
            ++n_err;
          } else {
            csv << ",,,\n";
          }
        }
      }
      const double mean = n_err ? err / double(n_err) : std::nan("");
      const double mean_naive = n_err ? naive / double(n_err) : std::nan("");
      summary << alpha / kDeg << ',' << method_name(method) << ',' << mean << ',' << mean_naive << ',' << measured
              << ',' << geom.rays() << '\n';
      log << "  " << std::setw(9) << alpha / kDeg << "  " << std::setw(11) << std::left << method_tag(method)
          << std::right << std::setw(8) << std::setprecision(4) << mean << "  " << std::setw(8) << mean_naive
          << "  " << measured << "/" << geom.rays() << "\n";
    }
  }
}

void cmd_project(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log) {
  fs::create_directories(paths.out);
  const DeformationField field = load_phantom(paths);
  const fs::path gpath = paths.geometry_or_default();
  AcquisitionGeometry geom;
  if (fs::exists(gpath)) {
    geom = load_acquisition(gpath.string());
  } else {
    geom = cfg.geometry.build(cfg.crystal.build(), field.grid);
    std::ofstream os = open_out(gpath);
    os << dump_acquisition(geom, &field.grid) << "\n";
  }
  const int workers = resolve_workers(cfg.workers);
  TensorSinogram d = trt_forward(measured_gradient(field), geom, workers);
  if (cfg.recon.noise_level > 0.0)
    d = add_noise(d, geom, cfg.recon.noise_level, cfg.seed + cfg.recon.noise_seed + 1);
  const fs::path out = paths.sinogram.empty() ? paths.out / "sinogram_truth.tvf" : fs::path(paths.sinogram);
  write_tvf(out.string(), to_tvf(d));
  log << "project: " << geom.rays() << " rays, noise level " << cfg.recon.noise_level << " -> " << out.string()
      << "\n";
}

void cmd_reconstruct(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log) {
  const fs::path gpath = paths.geometry_or_default();
  require(gpath, "geometry file");
  const AcquisitionGeometry geom = load_acquisition(gpath.string());
  const Grid grid = acquisition_grid(paths);
  const fs::path spath = paths.sinogram.empty() ? paths.out / "sinogram_truth.tvf" : fs::path(paths.sinogram);
  require(spath, "sinogram");
  const TensorSinogram d = sinogram_from(read_tvf(spath.string()));
  if (!d.conforms(geom)) throw ShapeMismatchError("sinogram does not match the geometry");

  std::vector<std::uint8_t> support;
  if (!paths.support.empty()) {
    const ScalarVolume s = scalar_volume_from(read_tvf(paths.support));
    if (!(s.grid == grid)) throw ShapeMismatchError("support volume does not match the grid");
    for (double v : s.data) support.push_back(v != 0.0);
  } else if (fs::exists(paths.phantom_or_default())) {
    const DeformationField f = load_phantom(paths);
    if (f.grid == grid && std::count(f.support.begin(), f.support.end(), std::uint8_t(0)) > 0) support = f.support;
  }

  ReconConfig rc = cfg.recon;
  rc.workers = cfg.workers;
  rc.beta = box_beta(cfg.recon.beta, grid);
  log << "reconstruct: beta " << cfg.recon.beta << " on the unit box, " << rc.beta << " in grid units\n";
  const auto t0 = Clock::now();
  const ReconResult res = reconstruct_tv(d, geom, grid, rc, support);
  TensorVolume F = res.F;
  for (Mat3& m : F.data) m.transposeInPlace();
  write_tvf(paths.recon_or_default().string(), to_tvf(F));

  std::ofstream csv = open_out(paths.out / "convergence.csv");
  csv << "iteration,objective,data_residual,relative_change\n";
  for (const auto& h : res.history)
    csv << h.iteration << ',' << h.objective << ',' << h.data_residual << ',' << h.relative_change << '\n';
  log << "reconstruct: " << res.iterations << " iterations (" << (res.converged ? "converged" : "iteration limit")
      << "), operator norm " << res.operator_norm << ", " << seconds_since(t0) << " s";
  if (!res.history.empty()) log << ", data residual " << res.history.back().data_residual;
  log << "\n";
}

void cmd_evaluate(const PipelineConfig&, const CommandPaths& paths, std::ostream& log) {
  require(paths.recon_or_default(), "reconstruction");
  require(paths.truth_or_default(), "truth volume");
  const TensorVolume recon = tensor_volume_from(read_tvf(paths.recon_or_default().string()));
  const TensorVolume truth = tensor_volume_from(read_tvf(paths.truth_or_default().string()));
  if (!(recon.grid == truth.grid)) throw ShapeMismatchError("reconstruction and truth grids differ");
  const Grid& g = truth.grid;
  std::vector<std::uint8_t> region;
  if (fs::exists(paths.phantom_or_default())) {
    const DeformationField f = load_phantom(paths);
    if (f.grid == g) region = f.support;
  }
  fs::create_directories(paths.out);
  const ErrorReport rep = error_report(recon, truth, region);

  static const char* full_names[9] = {"xx", "xy", "xz", "yx", "yy", "yz", "zx", "zy", "zz"};
  static const char* sym_names[6] = {"xx", "yy", "zz", "xy", "xz", "yz"};
  static const int sym_rc[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
  {
    std::ofstream csv = open_out(paths.out / "error_stats.csv");
    csv << "quantity,component,p50,p99,max\n";
    for (int c = 0; c < 9; ++c)
      csv << "F," << full_names[c] << ',' << rep.full[std::size_t(c)].p50 << ',' << rep.full[std::size_t(c)].p99
          << ',' << rep.full[std::size_t(c)].max << '\n';
    for (int c = 0; c < 6; ++c)
      csv << "sym," << sym_names[c] << ',' << rep.sym[std::size_t(c)].p50 << ',' << rep.sym[std::size_t(c)].p99
          << ',' << rep.sym[std::size_t(c)].max << '\n';
  }
  {
    std::ofstream csv = open_out(paths.out / "error_profile_z.csv");
    csv << "k,z,mean_max_error";
    for (auto* n : full_names) csv << ",p99_F_" << n;
    for (auto* n : sym_names) csv << ",p99_sym_" << n;
    csv << '\n';
    for (int k = 0; k < g.n[2]; ++k) {
      std::array<std::vector<double>, 15> vals;
      for (int i = 0; i < g.n[0]; ++i)
        for (int j = 0; j < g.n[1]; ++j) {
          const std::size_t idx = g.index(i, j, k);
          if (!region.empty() && !region[idx]) continue;
          for (int c = 0; c < 9; ++c) vals[std::size_t(c)].push_back(rep.abs_error[idx](c / 3, c % 3));
          for (int c = 0; c < 6; ++c)
            vals[std::size_t(9 + c)].push_back(rep.abs_sym_error[idx](sym_rc[c][0], sym_rc[c][1]));
        }
      csv << k << ',' << g.centre(0, 0, k).z() << ',' << rep.profile_z[std::size_t(k)];
      for (auto& v : vals) csv << ',' << (v.empty() ? 0.0 : percentile(v, 99));
      csv << '\n';
    }
  }
  {
    Image proj{g.n[0], g.n[2], std::vector<double>(std::size_t(g.n[0]) * std::size_t(g.n[2]))};
    for (int i = 0; i < g.n[0]; ++i)
      for (int k = 0; k < g.n[2]; ++k)
        proj.at(i, g.n[2] - 1 - k) = rep.projection_xz[std::size_t(i) * std::size_t(g.n[2]) + std::size_t(k)];
    write_pgm16((paths.out / "error_projection_xz.pgm").string(), proj);
    std::ofstream csv = open_out(paths.out / "error_projection_xz.csv");
    csv << "i,k,value\n";
    for (int i = 0; i < g.n[0]; ++i)
      for (int k = 0; k < g.n[2]; ++k)
        csv << i << ',' << k << ',' << rep.projection_xz[std::size_t(i) * std::size_t(g.n[2]) + std::size_t(k)] << '\n';
  }
  {
    const int j = g.n[1] / 2;
    const Image ti = slice_xz(truth, j, true), ri = slice_xz(recon, j, true);
    TensorVolume err(g, Mat3::Zero());
    for (std::size_t i = 0; i < g.size(); ++i) err[i] = rep.abs_error[i];
    const Image ei = slice_xz(err, j, true);
    const double hi = std::max(*std::max_element(ti.values.begin(), ti.values.end()),
                               *std::max_element(ri.values.begin(), ri.values.end()));
    write_pgm16((paths.out / "slice_truth.pgm").string(), ti, 0.0, hi > 0 ? hi : 1.0);
    write_pgm16((paths.out / "slice_recon.pgm").string(), ri, 0.0, hi > 0 ? hi : 1.0);
    write_pgm16((paths.out / "slice_error.pgm").string(), ei);
  }
  if (fs::exists(paths.geometry_or_default())) {
    const AcquisitionGeometry geom = load_acquisition(paths.geometry_or_default().string());
    std::ofstream csv = open_out(paths.out / "pole_figure.csv");
    csv << "tilt,xi_x,xi_y,xi_z,sx,sy\n";
    const int N = 257;
    RgbImage img{N, N, std::vector<std::array<std::uint8_t, 3>>(std::size_t(N) * N, {255, 255, 255})};
    const auto plot = [&](double x, double y, std::array<std::uint8_t, 3> c, int rad) {
      const int px = int(std::lround((x + 1.05) / 2.1 * (N - 1)));
      const int py = int(std::lround((1.05 - y) / 2.1 * (N - 1)));
      for (int dy = -rad; dy <= rad; ++dy)
        for (int dx = -rad; dx <= rad; ++dx)
          if (px + dx >= 0 && px + dx < N && py + dy >= 0 && py + dy < N && dx * dx + dy * dy <= rad * rad)
            img.pixels[std::size_t(py + dy) * N + std::size_t(px + dx)] = c;
    };
    for (int s = 0; s < 2000; ++s) plot(std::cos(kTwoPi * s / 2000), std::sin(kTwoPi * s / 2000), {128, 128, 128}, 0);
    for (std::size_t t = 0; t < geom.tilts.size(); ++t) {
      const Vec3& xi = geom.tilts[t].xi;
      const Vec2 s = stereographic(xi);
      csv << t << ',' << xi.x() << ',' << xi.y() << ',' << xi.z() << ',' << s.x() << ',' << s.y() << '\n';
      plot(s.x(), s.y(), {200, 30, 30}, 3);
    }
    write_ppm((paths.out / "pole_figure.ppm").string(), img);
  }
  double worst = 0.0;
  for (const auto& c : rep.sym) worst = std::max(worst, c.p99);
  log << "evaluate: worst symmetric-strain 99th percentile error " << worst << "\n";
}

void cmd_pipeline(const PipelineConfig& cfg, const CommandPaths& paths, std::ostream& log) {
  const auto t0 = Clock::now();
  cmd_phantom(cfg, paths, log);
  cmd_simulate(cfg, paths, log);
  cmd_detect(cfg, paths, log);
  CommandPaths p = paths;
  p.sinogram = (paths.out / "sinogram_truth.tvf").string();
  cmd_project(cfg, p, log);
  const double alpha = *std::max_element(cfg.alphas.begin(), cfg.alphas.end());
  p.sinogram = sinogram_file(paths.out, cfg.detection.methods.back(), alpha).string();
  cmd_reconstruct(cfg, p, log);
  cmd_evaluate(cfg, p, log);
  log << "pipeline finished in " << seconds_since(t0) << " s\n";
}

}  // namespace sedtomo
