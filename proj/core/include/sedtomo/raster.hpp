#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace sedtomo {

struct Image {
  int width = 0, height = 0;
  std::vector<double> values;  // row-major

  double& at(int x, int y) { return values[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  double at(int x, int y) const { return values[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
};

struct RgbImage {
  int width = 0, height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;
};

/// 16-bit binary PGM, linearly scaled between lo and hi (lo == hi: data range). With log_scale, log1p of the
/// normalised value.
void write_pgm16(const std::string& path, const Image& img, double lo = 0.0, double hi = 0.0, bool log_scale = false);
void write_ppm(const std::string& path, const RgbImage& img);

/// Diverging blue-white-red map on [-1, 1].
std::array<std::uint8_t, 3> diverging_colour(double t);

}  // namespace sedtomo
