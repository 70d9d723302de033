#pragma once

#include "sedtomo/deformation.hpp"
#include "sedtomo/diffraction.hpp"
#include "sedtomo/tomo.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sedtomo {

/// Length-prefixed "key=value" header after the "TVF1" magic; float64 little-endian payload, C-order.
struct TvfFile {
  std::map<std::string, std::string> header;
  std::vector<std::uint8_t> mask;  // sinograms only
  std::vector<double> payload;

  std::string get(const std::string& key) const;
  std::vector<long> dims() const;
  std::size_t components() const;
};

std::vector<std::uint8_t> encode_tvf(const TvfFile& f);
TvfFile decode_tvf(const std::vector<std::uint8_t>& bytes);
void write_tvf(const std::string& path, const TvfFile& f);
TvfFile read_tvf(const std::string& path);

std::string format_double(double v);

TvfFile to_tvf(const ScalarVolume& v);
TvfFile to_tvf(const VectorVolume& v);
TvfFile to_tvf(const TensorVolume& v);
TvfFile to_tvf(const DeformationField& f);
TvfFile to_tvf(const DiffractionPattern& p);
TvfFile to_tvf(const std::vector<DiffractionPattern>& set);
TvfFile to_tvf(const TensorSinogram& s);

ScalarVolume scalar_volume_from(const TvfFile& f);
TensorVolume tensor_volume_from(const TvfFile& f);
DeformationField deformation_from(const TvfFile& f);
DiffractionPattern pattern_from(const TvfFile& f);
std::vector<DiffractionPattern> pattern_set_from(const TvfFile& f);
TensorSinogram sinogram_from(const TvfFile& f);

}  // namespace sedtomo
