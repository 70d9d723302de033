#include "sedtomo/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace sedtomo {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = kPi / 180.0;

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Vec3 vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Mat3 basis(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must list three vectors");
  Mat3 m;
  for (int c = 0; c < 3; ++c) m.col(c) = vec3(j[std::size_t(c)], what);
  return m;
}

/// Inline object, or {"file": path} resolved against base.
json resolve(const json& j, const std::string& base) {
  if (j.is_object() && j.contains("file")) {
    fs::path p = j.at("file").get<std::string>();
    if (p.is_relative()) p = fs::path(base) / p;
    if (!fs::exists(p)) throw ConfigError("referenced file does not exist: " + p.string());
    return parse_json(slurp(p.string()), p.string());
  }
  return j;
}

WeightModel weights_from(const json& j) {
  const std::string model = get_or<std::string>(j, "model", "gaussian");
  if (model == "unit") return WeightModel::unit();
  if (model == "gaussian") return WeightModel::gaussian(get_or(j, "s", 2.5));
  if (model == "table") {
    std::map<Miller, cplx> table;
    for (const auto& e : j.at("entries")) {
      const auto hkl = e.at("hkl");
      table[{hkl[0].get<int>(), hkl[1].get<int>(), hkl[2].get<int>()}] = {get_or(e, "re", 0.0), get_or(e, "im", 0.0)};
    }
    return WeightModel::from_table(std::move(table), get_or(j, "envelope_s", 0.0));
  }
  throw ConfigError("unknown weight model " + model);
}

CrystalSpec crystal_from(const json& j) {
  CrystalSpec c;
  c.cutoff = get_or(j, "cutoff", c.cutoff);
  if (j.contains("weights")) c.weights = weights_from(j.at("weights"));
  if (j.contains("direct")) {
    c.source = CrystalSpec::Source::Direct;
    c.basis = basis(j.at("direct"), "direct basis");
  } else if (j.contains("reciprocal")) {
    c.source = CrystalSpec::Source::Reciprocal;
    c.basis = basis(j.at("reciprocal"), "reciprocal basis");
  } else {
    const std::string preset = get_or<std::string>(j, "preset", "silicon");
    if (preset != "silicon") throw ConfigError("unknown crystal preset " + preset);
    const std::string zone = get_or<std::string>(j, "zone", "001");
    if (zone == "001") c.zone = SiliconZone::Z001;
    else if (zone == "011") c.zone = SiliconZone::Z011;
    else throw ConfigError("silicon zone must be 001 or 011");
    c.weights.envelope_s = j.contains("weights") ? get_or(j.at("weights"), "s", 2.5) : 2.5;
  }
  if (!(c.cutoff > 0.0)) throw ConfigError("crystal cutoff must be positive");
  return c;
}

Grid grid_from(const json& j) {
  const auto n = j.at("n");
  if (!n.is_array() || n.size() != 3) throw ConfigError("grid.n must have three entries");
  Grid g;
  g.n = {n[0].get<int>(), n[1].get<int>(), n[2].get<int>()};
  g.voxel = get_or(j, "voxel", 1.0);
  if (g.n[0] < 1 || g.n[1] < 1 || g.n[2] < 1 || !(g.voxel > 0.0)) throw ConfigError("invalid grid");
  if (j.contains("origin")) {
    g.origin = vec3(j.at("origin"), "grid.origin");
  } else {
    g = Grid::centred(g.n, g.voxel);
  }
  return g;
}

PhantomConfig phantom_from(const json& j) {
  PhantomConfig p;
  p.grid = grid_from(j.at("grid"));
  const std::string type = get_or<std::string>(j, "type", "layered");
  if (type == "layered") {
    p.type = PhantomConfig::Type::Layered;
    p.layered.L = get_or(j, "L", 1);
    p.layered.d = get_or(j, "d", 1);
    p.layered.sigma = get_or(j, "sigma", 0.01);
    p.layered.seed = get_or<std::uint64_t>(j, "seed", 0);
    const std::string a = get_or<std::string>(j, "alignment", "continuity");
    if (a == "zero") p.layered.alignment = Alignment::Zero;
    else if (a == "continuity") p.layered.alignment = Alignment::Continuity;
    else throw ConfigError("alignment must be zero or continuity");
    if (p.layered.L < 1 || p.layered.L > p.grid.n[2] || p.layered.d < 1 || p.layered.d > 3 || p.layered.sigma < 0)
      throw ConfigError("invalid layered phantom parameters");
  } else if (type == "dislocation") {
    p.type = PhantomConfig::Type::Dislocation;
    auto& s = p.dislocation;
    if (j.contains("burgers")) s.burgers = vec3(j.at("burgers"), "burgers");
    if (j.contains("line")) s.line = vec3(j.at("line"), "line");
    if (j.contains("core_point")) s.core_point = vec3(j.at("core_point"), "core_point");
    else s.core_point = p.grid.box_centre();
    s.nu = get_or(j, "nu", s.nu);
    s.core_exclusion_radius = get_or(j, "core_exclusion_radius", s.core_exclusion_radius);
    const std::string variant = get_or<std::string>(j, "variant", "displacement");
    if (variant == "displacement") s.subtract_position = false;
    else if (variant == "subtract-position") s.subtract_position = true;
    else throw ConfigError("dislocation variant must be displacement or subtract-position");
    p.fd_step = get_or(j, "fd_step", 0.0);
    try {
      s.validate();
    } catch (const PreconditionError& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("unknown phantom type " + type);
  }
  return p;
}

GeometrySpec geometry_from(const json& j) {
  GeometrySpec g;
  g.tilt_limit = get_or(j, "tilt_limit_deg", 70.0) * kDeg;
  g.max_index = get_or(j, "max_index", 1);
  if (j.contains("directions"))
    for (const auto& d : j.at("directions")) g.directions.push_back(vec3(d, "direction"));
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    g.scan.nu = get_or(s, "nu", 8);
    g.scan.nv = get_or(s, "nv", 8);
    g.scan_pitch_from_voxel = !s.contains("pitch");
    g.scan.pitch = get_or(s, "pitch", 1.0);
  } else {
    g.scan = {8, 8, 1.0};
  }
  if (g.scan.nu < 1 || g.scan.nv < 1 || !(g.scan.pitch > 0) || g.max_index < 1) throw ConfigError("invalid geometry");
  return g;
}

}  // namespace

IdealCrystal CrystalSpec::build() const {
  switch (source) {
    case Source::SiliconPreset:
      return silicon(zone, cutoff, weights.envelope_s > 0 ? weights.envelope_s : 2.5);
    case Source::Direct: {
      const DirectLattice lat{basis.col(0), basis.col(1), basis.col(2)};
      return enumerate_peaks(reciprocal_from_direct(lat), cutoff, weights);
    }
    case Source::Reciprocal:
      return enumerate_peaks({basis.col(0), basis.col(1), basis.col(2)}, cutoff, weights);
  }
  throw ConfigError("unknown crystal source");
}

DeformationField PhantomConfig::build() const {
  if (type == Type::Layered) return sample_layered_phantom(layered, grid);
  return dislocation_field(dislocation, grid, fd_step > 0 ? fd_step : grid.voxel / 100.0);
}

AcquisitionGeometry GeometrySpec::build(const IdealCrystal& crystal, const Grid& grid) const {
  ScanGrid s = scan;
  if (scan_pitch_from_voxel) s.pitch = grid.voxel;
  AcquisitionGeometry g;
  if (directions.empty()) {
    g = zone_axis_geometry(crystal, tilt_limit, max_index, s, grid.box_centre());
  } else {
    g.scan = s;
    g.centre = grid.box_centre();
    g.tilt_limit = tilt_limit;
    for (const Vec3& d : directions) g.tilts.push_back(make_tilt(d));
    g.validate();
  }
  return g;
}

void PipelineConfig::validate() const {
  if (alphas.empty()) throw ConfigError("precession angle list is empty");
  for (double a : alphas)
    if (!(a >= 0.0 && a < kPi / 4)) throw ConfigError("precession angle out of range");
  if (n_t < 1 || (n_t & (n_t - 1)) != 0) throw ConfigError("n_t must be a power of two");
  if (detection.methods.empty()) throw ConfigError("no detection method selected");
  if (detector.nx < 3 || detector.ny < 3 || !(detector.pitch > 0)) throw ConfigError("invalid detector");
  if (!(probe.wavelength > 0)) throw ConfigError("wavelength must be positive");
  if (!(recon.beta >= 0) || recon.max_iters < 1) throw ConfigError("invalid reconstruction settings");
}

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& base_dir) {
  const json j = parse_json(text, "pipeline config");
  PipelineConfig c;
  try {
    if (j.contains("crystal")) c.crystal = crystal_from(resolve(j.at("crystal"), base_dir));
    if (j.contains("phantom")) c.phantom = phantom_from(resolve(j.at("phantom"), base_dir));
    if (j.contains("geometry")) c.geometry = geometry_from(resolve(j.at("geometry"), base_dir));
    if (j.contains("probe")) {
      const auto& p = j.at("probe");
      c.probe.wavelength = get_or(p, "wavelength", c.probe.wavelength);
      c.probe.aperture = get_or(p, "aperture", 0.0);
    }
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      c.detector.pitch = get_or(d, "pitch", c.detector.pitch);
      if (d.contains("k_max")) {
        c.detector = DetectorGrid::covering(d.at("k_max").get<double>(), c.detector.pitch);
      } else {
        c.detector.nx = get_or(d, "nx", c.detector.nx);
        c.detector.ny = get_or(d, "ny", c.detector.ny);
      }
    }
    if (j.contains("precession")) {
      const auto& p = j.at("precession");
      if (p.contains("alpha_deg")) {
        c.alphas.clear();
        for (const auto& a : p.at("alpha_deg")) c.alphas.push_back(a.get<double>() * kDeg);
      }
      c.n_t = get_or(p, "n_t", c.n_t);
    }
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      if (d.contains("methods")) {
        c.detection.methods.clear();
        for (const auto& m : d.at("methods")) {
          const auto s = m.get<std::string>();
          if (s == "com") c.detection.methods.push_back(CentreMethod::CentreOfMass);
          else if (s == "registered") c.detection.methods.push_back(CentreMethod::Registered);
          else throw ConfigError("unknown detection method " + s);
        }
      }
      c.detection.rbar = get_or(d, "rbar", 0.0);
      c.detection.max_shift = get_or(d, "max_shift", c.detection.max_shift);
      c.detection.subpixel = get_or(d, "subpixel", true);
    }
    if (j.contains("recon")) {
      const auto& r = j.at("recon");
      c.recon.beta = get_or(r, "beta", c.recon.beta);
      c.recon.max_iters = get_or(r, "max_iters", c.recon.max_iters);
      c.recon.tolerance = get_or(r, "tolerance", c.recon.tolerance);
      c.recon.noise_level = get_or(r, "noise_level", 0.0);
      c.recon.noise_seed = get_or<std::uint64_t>(r, "noise_seed", 0);
      c.recon.log_every = get_or(r, "log_every", c.recon.log_every);
    }
    c.output = get_or<std::string>(j, "output", c.output);
    c.workers = get_or(j, "workers", 0);
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  return parse_pipeline_config(slurp(path), fs::path(path).parent_path().string().empty()
                                                ? std::string(".")
                                                : fs::path(path).parent_path().string());
}

CrystalSpec load_crystal_spec(const std::string& path) { return crystal_from(parse_json(slurp(path), path)); }
PhantomConfig load_phantom_config(const std::string& path) { return phantom_from(parse_json(slurp(path), path)); }
GeometrySpec load_geometry_spec(const std::string& path) { return geometry_from(parse_json(slurp(path), path)); }

std::string dump_acquisition(const AcquisitionGeometry& g, const Grid* grid) {
  json j;
  if (grid) {
    j["grid"] = {{"n", {grid->n[0], grid->n[1], grid->n[2]}},
                 {"voxel", grid->voxel},
                 {"origin", {grid->origin.x(), grid->origin.y(), grid->origin.z()}}};
  }
  j["scan"] = {{"nu", g.scan.nu}, {"nv", g.scan.nv}, {"pitch", g.scan.pitch}};
  j["centre"] = {g.centre.x(), g.centre.y(), g.centre.z()};
  j["tilt_limit"] = g.tilt_limit;
  j["tilts"] = json::array();
  for (const Tilt& t : g.tilts) {
    j["tilts"].push_back({{"xi", {t.xi.x(), t.xi.y(), t.xi.z()}},
                          {"eu", {t.eu.x(), t.eu.y(), t.eu.z()}},
                          {"ev", {t.ev.x(), t.ev.y(), t.ev.z()}}});
  }
  return j.dump(2);
}

AcquisitionGeometry load_acquisition(const std::string& path) {
  const json j = parse_json(slurp(path), path);
  AcquisitionGeometry g;
  try {
    g.scan = {j.at("scan").at("nu").get<int>(), j.at("scan").at("nv").get<int>(),
              j.at("scan").at("pitch").get<double>()};
    g.centre = vec3(j.at("centre"), "centre");
    g.tilt_limit = j.at("tilt_limit").get<double>();
    for (const auto& t : j.at("tilts"))
      g.tilts.push_back({vec3(t.at("xi"), "xi"), vec3(t.at("eu"), "eu"), vec3(t.at("ev"), "ev")});
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  g.validate();
  return g;
}

std::optional<Grid> load_acquisition_grid(const std::string& path) {
  const json j = parse_json(slurp(path), path);
  if (!j.contains("grid")) return std::nullopt;
  try {
    return grid_from(j.at("grid"));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace sedtomo
