#include "doctest.h"
#include "support.hpp"

#include "sedtomo/config.hpp"
#include "sedtomo/raster.hpp"
#include "sedtomo/tvf.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

using namespace sedtomo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("sedtomo_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Grid odd_grid() {
  Grid g;
  g.n = {3, 4, 5};
  g.voxel = 0.1 + 0.2;  // not exactly representable in a short decimal
  g.origin = Vec3(-1.0 / 3.0, 2e-17, 12345.678);
  return g;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, -0.0, 1.0, 0.1 + 0.2, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5e-8,
                   std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max()}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("tensor volumes round-trip bit-exactly") {
  TempDir tmp;
  std::mt19937_64 rng(30);
  TensorVolume v(odd_grid(), Mat3::Zero());
  for (Mat3& m : v.data) m = testing::random_matrix(rng, 1e-3);
  v.data[3](1, 1) = std::numeric_limits<double>::quiet_NaN();
  write_tvf(tmp.file("v.tvf"), to_tvf(v));
  const TensorVolume w = tensor_volume_from(read_tvf(tmp.file("v.tvf")));
  CHECK(w.grid == v.grid);
  REQUIRE(w.data.size() == v.data.size());
  CHECK(std::memcmp(w.data.data(), v.data.data(), v.data.size() * sizeof(Mat3)) == 0);
  // writing the reloaded volume gives identical bytes
  write_tvf(tmp.file("w.tvf"), to_tvf(w));
  CHECK(slurp(tmp.file("v.tvf")) == slurp(tmp.file("w.tvf")));
}

TEST_CASE("scalar volumes and deformation fields round-trip") {
  std::mt19937_64 rng(31);
  ScalarVolume s(odd_grid(), 0.0);
  for (double& x : s.data) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  const ScalarVolume s2 = scalar_volume_from(decode_tvf(encode_tvf(to_tvf(s))));
  CHECK(s2.grid == s.grid);
  CHECK(s2.data == s.data);

  const DeformationField f = sample_layered_phantom({3, 3, 0.02, 5, Alignment::Continuity}, odd_grid());
  DeformationField g = f;
  g.support[2] = 0;
  g.b[1] = Vec3(0.1, -0.2, 1.0 / 7.0);
  const DeformationField h = deformation_from(decode_tvf(encode_tvf(to_tvf(g))));
  CHECK(h.grid == g.grid);
  CHECK(h.A == g.A);
  CHECK(h.b == g.b);
  CHECK(h.support == g.support);
  CHECK_THROWS_AS(tensor_volume_from(to_tvf(g)), FormatError);
}

TEST_CASE("patterns and sinograms round-trip") {
  std::mt19937_64 rng(32);
  DiffractionPattern p{DetectorGrid{7, 5, 0.013}, std::vector<double>(35), true};
  for (double& x : p.intensity) x = std::uniform_real_distribution<double>(0, 1)(rng);
  const DiffractionPattern q = pattern_from(decode_tvf(encode_tvf(to_tvf(p))));
  CHECK(q.grid.nx == 7);
  CHECK(q.grid.ny == 5);
  CHECK(q.grid.pitch == 0.013);
  CHECK(q.intensity == p.intensity);

  std::vector<DiffractionPattern> set(3, p);
  set[1].intensity[4] = 9.0;
  const auto set2 = pattern_set_from(decode_tvf(encode_tvf(to_tvf(set))));
  REQUIRE(set2.size() == 3);
  CHECK(set2[1].intensity == set[1].intensity);
  set[2].grid.nx = 5;
  set[2].intensity.resize(25);
  CHECK_THROWS_AS(to_tvf(set), ShapeMismatchError);

  AcquisitionGeometry g;
  g.tilts = {make_tilt(Vec3::UnitZ()), make_tilt(Vec3(0.2, 0.1, 1.0))};
  g.scan = {3, 2, 1.5};
  TensorSinogram s = TensorSinogram::zeros(g);
  for (Mat3& m : s.data) m = testing::random_matrix(rng);
  for (std::size_t r = 0; r < s.size(); r += 3) s.mask[r] = 0;
  const auto f = to_tvf(s);
  const auto bytes = encode_tvf(f);
  const std::size_t len = std::size_t(bytes[4]) | std::size_t(bytes[5]) << 8;
  // mask packed one bit per ray
  CHECK(bytes.size() == 8 + len + (s.size() + 7) / 8 + s.size() * 9 * 8);
  const TensorSinogram t = sinogram_from(decode_tvf(bytes));
  CHECK(t.n_tilts == 2);
  CHECK(t.nu == 3);
  CHECK(t.nv == 2);
  CHECK(t.data == s.data);
  CHECK(t.mask == s.mask);
}

TEST_CASE("byte layout") {
  ScalarVolume s(Grid::centred({1, 1, 2}, 1.0), 0.0);
  s.data = {1.0, -2.0};
  const auto bytes = encode_tvf(to_tvf(s));
  REQUIRE(bytes.size() > 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "TVF1");
  const std::uint32_t len = std::uint32_t(bytes[4]) | std::uint32_t(bytes[5]) << 8 | std::uint32_t(bytes[6]) << 16 |
                            std::uint32_t(bytes[7]) << 24;
  CHECK(bytes.size() == 8 + len + 16);
  // last eight bytes: -2.0 little endian
  const std::uint8_t neg2[8] = {0, 0, 0, 0, 0, 0, 0, 0xC0};
  CHECK(std::memcmp(bytes.data() + bytes.size() - 8, neg2, 8) == 0);
  const std::string header(bytes.begin() + 8, bytes.begin() + 8 + len);
  CHECK(header.find("kind=volume\n") != std::string::npos);
}

TEST_CASE("malformed files are rejected") {
  CHECK_THROWS_AS(decode_tvf({'T', 'V', 'F', '2', 0, 0, 0, 0}), FormatError);
  CHECK_THROWS_AS(decode_tvf({'T', 'V'}), FormatError);
  auto bytes = encode_tvf(to_tvf(ScalarVolume(Grid::centred({2, 2, 2}, 1.0), 1.0)));
  bytes.pop_back();
  CHECK_THROWS_AS(decode_tvf(bytes), FormatError);
  bytes = encode_tvf(to_tvf(ScalarVolume(Grid::centred({2, 2, 2}, 1.0), 1.0)));
  bytes[5] = 0xFF;
  CHECK_THROWS_AS(decode_tvf(bytes), FormatError);
  CHECK_THROWS_AS(read_tvf("/nonexistent/file.tvf"), FormatError);
  const TvfFile f = to_tvf(ScalarVolume(Grid::centred({2, 2, 2}, 1.0), 1.0));
  CHECK_THROWS_AS(f.get("missing"), FormatError);
  CHECK_THROWS_AS(sinogram_from(f), FormatError);
}

TEST_CASE("pipeline configuration") {
  const PipelineConfig c = parse_pipeline_config(R"({
    // comments are allowed
    "seed": 11,
    "crystal": {"preset": "silicon", "zone": "011", "cutoff": 4.0},
    "phantom": {"type": "layered", "grid": {"n": [2, 3, 4], "voxel": 10}, "L": 3, "d": 2, "sigma": 0.02},
    "probe": {"wavelength": 0.025},
    "detector": {"nx": 101, "ny": 91, "pitch": 0.04},
    "precession": {"alpha_deg": [0, 0.5, 2], "n_t": 16},
    "geometry": {"tilt_limit_deg": 40, "max_index": 2, "scan": {"nu": 2, "nv": 3}},
    "detection": {"methods": ["registered"], "rbar": 0.7},
    "recon": {"beta": 1e-4, "max_iters": 50, "noise_level": 0.01}
  })");
  CHECK(c.seed == 11);
  CHECK(c.crystal.zone == SiliconZone::Z011);
  CHECK(c.phantom.grid.n == std::array<int, 3>{2, 3, 4});
  CHECK(c.phantom.layered.L == 3);
  CHECK(c.phantom.layered.sigma == 0.02);
  CHECK(c.probe.wavelength == 0.025);
  CHECK(c.detector.nx == 101);
  CHECK(c.detector.ny == 91);
  REQUIRE(c.alphas.size() == 3);
  CHECK(c.alphas[2] == doctest::Approx(2.0 * kPi / 180));
  CHECK(c.n_t == 16);
  CHECK(c.geometry.max_index == 2);
  CHECK(c.geometry.tilt_limit == doctest::Approx(40.0 * kPi / 180));
  CHECK(c.detection.methods == std::vector<CentreMethod>{CentreMethod::Registered});
  CHECK(c.recon.beta == 1e-4);
  CHECK(c.recon.noise_level == 0.01);

  const auto field = c.phantom.build();
  CHECK(field.grid.n == std::array<int, 3>{2, 3, 4});
  CHECK(c.crystal.build().peaks.size() > 1);

  const PipelineConfig k = parse_pipeline_config(R"({"detector": {"k_max": 3.0, "pitch": 0.05}})");
  CHECK(k.detector.k_max() >= 3.0);
  CHECK(k.detector.nx % 2 == 1);
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(parse_pipeline_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"precession": {"alpha_deg": []}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"precession": {"alpha_deg": [50]}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"precession": {"n_t": 12}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"crystal": {"preset": "copper"}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"phantom": {"type": "bubble"}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"detection": {"methods": ["xcorr"]}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"recon": {"beta": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"probe": {"wavelength": "short"}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"crystal": {"file": "missing.json"}})", "/nonexistent"), ConfigError);
  CHECK_THROWS_AS(load_pipeline_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("configuration sub-files") {
  TempDir tmp;
  std::ofstream(tmp.file("crystal.json")) << R"({"preset": "silicon", "zone": "001", "cutoff": 3.0})";
  std::ofstream(tmp.file("run.json")) << R"({"crystal": {"file": "crystal.json"}})";
  const PipelineConfig c = load_pipeline_config(tmp.file("run.json"));
  CHECK(c.crystal.cutoff == 3.0);
  CHECK(load_crystal_spec(tmp.file("crystal.json")).cutoff == 3.0);
}

TEST_CASE("acquisition files round-trip") {
  TempDir tmp;
  const IdealCrystal si = silicon(SiliconZone::Z001, 3.0);
  const Grid grid = odd_grid();
  const auto g = zone_axis_geometry(si, 60.0 * kPi / 180, 1, {3, 4, 0.7}, Vec3(1.0 / 3.0, -2.0, 0.5));
  std::ofstream(tmp.file("geom.json")) << dump_acquisition(g, &grid);
  const auto h = load_acquisition(tmp.file("geom.json"));
  REQUIRE(h.tilts.size() == g.tilts.size());
  for (std::size_t t = 0; t < g.tilts.size(); ++t) {
    CHECK(h.tilts[t].xi == g.tilts[t].xi);
    CHECK(h.tilts[t].eu == g.tilts[t].eu);
    CHECK(h.tilts[t].ev == g.tilts[t].ev);
  }
  CHECK(h.centre == g.centre);
  CHECK(h.scan.nu == 3);
  CHECK(h.scan.pitch == 0.7);
  const auto hg = load_acquisition_grid(tmp.file("geom.json"));
  REQUIRE(hg.has_value());
  CHECK(*hg == grid);
  std::ofstream(tmp.file("bare.json")) << dump_acquisition(g);
  CHECK_FALSE(load_acquisition_grid(tmp.file("bare.json")).has_value());
}

TEST_CASE("raster output") {
  TempDir tmp;
  Image img{3, 2, {0.0, 0.5, 1.0, 2.0, -1.0, 1.0}};
  write_pgm16(tmp.file("a.pgm"), img, 0.0, 1.0);
  const auto bytes = slurp(tmp.file("a.pgm"));
  const std::string head = "P5\n3 2\n65535\n";
  REQUIRE(bytes.size() == head.size() + 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + long(head.size())) == head);
  const auto px = [&](int i) { return (unsigned(bytes[head.size() + 2 * std::size_t(i)]) << 8) | bytes[head.size() + 2 * std::size_t(i) + 1]; };
  CHECK(px(0) == 0);
  CHECK(px(1) == 32768);
  CHECK(px(2) == 65535);
  CHECK(px(3) == 65535);  // clamped
  CHECK(px(4) == 0);
  img.values.pop_back();
  CHECK_THROWS_AS(write_pgm16(tmp.file("b.pgm"), img), ShapeMismatchError);

  RgbImage rgb{2, 1, {diverging_colour(-1.0), diverging_colour(1.0)}};
  write_ppm(tmp.file("c.ppm"), rgb);
  CHECK(slurp(tmp.file("c.ppm")).size() == std::string("P6\n2 1\n255\n").size() + 6);
  CHECK(diverging_colour(0.0) == std::array<std::uint8_t, 3>{255, 255, 255});
  CHECK(diverging_colour(-1.0) == std::array<std::uint8_t, 3>{0, 0, 255});
  CHECK(diverging_colour(5.0) == std::array<std::uint8_t, 3>{255, 0, 0});
}
