#include "sedtomo/raster.hpp"

#include "sedtomo/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace sedtomo {

void write_pgm16(const std::string& path, const Image& img, double lo, double hi, bool log_scale) {
  if (img.values.size() != std::size_t(img.width) * std::size_t(img.height))
    throw ShapeMismatchError("image buffer does not match its size");
  if (lo == hi && !img.values.empty()) {
    const auto [mn, mx] = std::minmax_element(img.values.begin(), img.values.end());
    lo = *mn;
    hi = *mx;
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (double v : img.values) {
    double t = std::clamp((v - lo) / span, 0.0, 1.0);
    if (log_scale) t = std::log1p(1000.0 * t) / std::log1p(1000.0);
    const auto u = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    const char bytes[2] = {char(u >> 8), char(u & 0xFF)};
    os.write(bytes, 2);
  }
  if (!os) throw FormatError("failed writing " + path);
}

void write_ppm(const std::string& path, const RgbImage& img) {
  if (img.pixels.size() != std::size_t(img.width) * std::size_t(img.height))
    throw ShapeMismatchError("image buffer does not match its size");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const auto& p : img.pixels) os.write(reinterpret_cast<const char*>(p.data()), 3);
  if (!os) throw FormatError("failed writing " + path);
}

std::array<std::uint8_t, 3> diverging_colour(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const auto c = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  if (t < 0) return {c(1.0 + t), c(1.0 + t), c(1.0)};
  return {c(1.0), c(1.0 - t), c(1.0 - t)};
}

}  // namespace sedtomo
