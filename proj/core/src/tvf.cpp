#include "sedtomo/tvf.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace sedtomo {

static_assert(std::endian::native == std::endian::little, "TVF encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'V', 'F', '1'};

std::string join(const std::vector<long>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join3(const Vec3& v) { return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z()); }

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("bad number in TVF header: " + s);
  return v;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

Vec3 parse3(const std::string& s) {
  const auto p = split(s);
  if (p.size() != 3) throw FormatError("expected three components: " + s);
  return {parse_double(p[0]), parse_double(p[1]), parse_double(p[2])};
}

TvfFile volume_header(const Grid& g, const char* rank, std::size_t comps) {
  TvfFile f;
  f.header["kind"] = "volume";
  f.header["rank"] = rank;
  f.header["dims"] = join({g.n[0], g.n[1], g.n[2]});
  f.header["components"] = std::to_string(comps);
  f.header["voxel_size"] = format_double(g.voxel);
  f.header["origin"] = join3(g.origin);
  f.header["endian"] = "little";
  f.payload.reserve(g.size() * comps);
  return f;
}

Grid grid_from(const TvfFile& f) {
  const auto d = f.dims();
  if (d.size() != 3) throw FormatError("volume needs three dimensions");
  Grid g;
  g.n = {int(d[0]), int(d[1]), int(d[2])};
  g.voxel = parse_double(f.get("voxel_size"));
  g.origin = parse3(f.get("origin"));
  return g;
}

void expect(const TvfFile& f, const std::string& kind, std::size_t comps) {
  if (f.get("kind") != kind) throw FormatError("expected TVF kind " + kind + ", found " + f.get("kind"));
  if (f.components() != comps) throw FormatError("unexpected component count in TVF file");
}

TvfFile pattern_header(const DetectorGrid& g, const char* kind, const std::vector<long>& dims) {
  TvfFile f;
  f.header["kind"] = kind;
  f.header["rank"] = "scalar";
  f.header["dims"] = join(dims);
  f.header["components"] = "1";
  f.header["pitch"] = format_double(g.pitch);
  f.header["endian"] = "little";
  (void)g;
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string TvfFile::get(const std::string& key) const {
  auto it = header.find(key);
  if (it == header.end()) throw FormatError("TVF header lacks key " + key);
  return it->second;
}

std::vector<long> TvfFile::dims() const {
  std::vector<long> d;
  for (const auto& s : split(get("dims"))) d.push_back(long(parse_double(s)));
  return d;
}

std::size_t TvfFile::components() const { return std::size_t(parse_double(get("components"))); }

std::vector<std::uint8_t> encode_tvf(const TvfFile& f) {
  std::string text;
  for (const auto& [k, v] : f.header) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw FormatError("invalid TVF header entry " + k);
    text += k + "=" + v + "\n";
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  const std::uint32_t len = std::uint32_t(text.size());
  for (int b = 0; b < 4; ++b) out.push_back(std::uint8_t((len >> (8 * b)) & 0xFF));
  out.insert(out.end(), text.begin(), text.end());
  if (f.header.count("kind") && f.header.at("kind") == "sinogram") {
    std::vector<std::uint8_t> bits((f.mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < f.mask.size(); ++i)
      if (f.mask[i]) bits[i / 8] |= std::uint8_t(1u << (i % 8));
    out.insert(out.end(), bits.begin(), bits.end());
  }
  const std::size_t off = out.size();
  out.resize(off + f.payload.size() * 8);
  if (!f.payload.empty()) std::memcpy(out.data() + off, f.payload.data(), f.payload.size() * 8);
  return out;
}

TvfFile decode_tvf(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a TVF1 file");
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= std::uint32_t(bytes[std::size_t(4 + b)]) << (8 * b);
  if (bytes.size() < 8 + std::size_t(len)) throw FormatError("truncated TVF header");
  TvfFile f;
  const std::string text(bytes.begin() + 8, bytes.begin() + 8 + len);
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed TVF header line: " + line);
    f.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (f.header.count("endian") && f.header["endian"] != "little") throw FormatError("unsupported TVF endianness");
  std::size_t n = f.components();
  for (long d : f.dims()) n *= std::size_t(d);
  std::size_t pos = 8 + len;
  if (f.get("kind") == "sinogram") {
    const std::size_t rays = n / f.components();
    const std::size_t nb = (rays + 7) / 8;
    if (bytes.size() < pos + nb) throw FormatError("truncated TVF mask");
    f.mask.resize(rays);
    for (std::size_t i = 0; i < rays; ++i) f.mask[i] = (bytes[pos + i / 8] >> (i % 8)) & 1u;
    pos += nb;
  }
  if (bytes.size() != pos + n * 8) throw FormatError("TVF payload length does not match its header");
  f.payload.resize(n);
  if (n) std::memcpy(f.payload.data(), bytes.data() + pos, n * 8);
  return f;
}

void write_tvf(const std::string& path, const TvfFile& f) {
  const auto bytes = encode_tvf(f);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw FormatError("failed writing " + path);
}

TvfFile read_tvf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tvf(bytes);
}

TvfFile to_tvf(const ScalarVolume& v) {
  TvfFile f = volume_header(v.grid, "scalar", 1);
  f.payload = v.data;
  return f;
}

TvfFile to_tvf(const VectorVolume& v) {
  TvfFile f = volume_header(v.grid, "vector", 3);
  for (const Vec3& x : v.data) f.payload.insert(f.payload.end(), x.data(), x.data() + 3);
  return f;
}

TvfFile to_tvf(const TensorVolume& v) {
  TvfFile f = volume_header(v.grid, "tensor", 9);
  for (const Mat3& m : v.data)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.payload.push_back(m(r, c));
  return f;
}

TvfFile to_tvf(const DeformationField& d) {
  TvfFile f = volume_header(d.grid, "deformation", 13);
  f.header["layout"] = "A(9 row-major),b(3),support(1)";
  for (std::size_t j = 0; j < d.size(); ++j) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.payload.push_back(d.A[j](r, c));
    f.payload.insert(f.payload.end(), d.b[j].data(), d.b[j].data() + 3);
    f.payload.push_back(d.support[j] ? 1.0 : 0.0);
  }
  return f;
}

TvfFile to_tvf(const DiffractionPattern& p) {
  TvfFile f = pattern_header(p.grid, "pattern", {p.grid.nx, p.grid.ny});
  f.header["layout"] = "row-major over ky, kx";
  f.payload = p.intensity;
  return f;
}

TvfFile to_tvf(const std::vector<DiffractionPattern>& set) {
  if (set.empty()) throw PreconditionError("empty pattern set");
  const DetectorGrid& g = set.front().grid;
  TvfFile f = pattern_header(g, "patterns", {long(set.size()), g.nx, g.ny});
  f.header["layout"] = "pattern, row-major over ky, kx";
  for (const auto& p : set) {
    if (p.grid.nx != g.nx || p.grid.ny != g.ny || p.grid.pitch != g.pitch)
      throw ShapeMismatchError("patterns in a set must share a detector");
    f.payload.insert(f.payload.end(), p.intensity.begin(), p.intensity.end());
  }
  return f;
}

TvfFile to_tvf(const TensorSinogram& s) {
  TvfFile f;
  f.header["kind"] = "sinogram";
  f.header["rank"] = "tensor";
  f.header["dims"] = join({long(s.n_tilts), s.nu, s.nv});
  f.header["components"] = "9";
  f.header["endian"] = "little";
  f.mask = s.mask;
  for (const Mat3& m : s.data)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.payload.push_back(m(r, c));
  return f;
}

ScalarVolume scalar_volume_from(const TvfFile& f) {
  expect(f, "volume", 1);
  ScalarVolume v(grid_from(f), 0.0);
  v.data = f.payload;
  return v;
}

TensorVolume tensor_volume_from(const TvfFile& f) {
  expect(f, "volume", 9);
  TensorVolume v(grid_from(f), Mat3::Zero());
  for (std::size_t j = 0; j < v.size(); ++j)
    for (int e = 0; e < 9; ++e) v.data[j](e / 3, e % 3) = f.payload[9 * j + std::size_t(e)];
  return v;
}

DeformationField deformation_from(const TvfFile& f) {
  expect(f, "volume", 13);
  DeformationField d = DeformationField::identity(grid_from(f));
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double* p = &f.payload[13 * j];
    for (int e = 0; e < 9; ++e) d.A[j](e / 3, e % 3) = p[e];
    d.b[j] = Vec3(p[9], p[10], p[11]);
    d.support[j] = p[12] != 0.0;
  }
  return d;
}

DiffractionPattern pattern_from(const TvfFile& f) {
  expect(f, "pattern", 1);
  const auto d = f.dims();
  DiffractionPattern p;
  p.grid = {int(d.at(0)), int(d.at(1)), parse_double(f.get("pitch"))};
  p.intensity = f.payload;
  return p;
}

std::vector<DiffractionPattern> pattern_set_from(const TvfFile& f) {
  expect(f, "patterns", 1);
  const auto d = f.dims();
  const DetectorGrid g{int(d.at(1)), int(d.at(2)), parse_double(f.get("pitch"))};
  std::vector<DiffractionPattern> out(std::size_t(d.at(0)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].grid = g;
    out[i].intensity.assign(f.payload.begin() + long(i * g.size()), f.payload.begin() + long((i + 1) * g.size()));
  }
  return out;
}

TensorSinogram sinogram_from(const TvfFile& f) {
  expect(f, "sinogram", 9);
  const auto d = f.dims();
  TensorSinogram s;
  s.n_tilts = std::size_t(d.at(0));
  s.nu = int(d.at(1));
  s.nv = int(d.at(2));
  s.mask = f.mask;
  s.data.resize(s.mask.size());
  for (std::size_t j = 0; j < s.data.size(); ++j)
    for (int e = 0; e < 9; ++e) s.data[j](e / 3, e % 3) = f.payload[9 * j + std::size_t(e)];
  return s;
}

}  // namespace sedtomo
