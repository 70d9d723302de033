#pragma once

#include "sedtomo/common.hpp"

#include <random>

namespace testing {

inline sedtomo::Mat3 random_matrix(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  sedtomo::Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = scale * u(rng);
  return m;
}

inline sedtomo::Vec3 random_vector(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return scale * sedtomo::Vec3(u(rng), u(rng), u(rng));
}

inline sedtomo::Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return sedtomo::Vec3(n(rng), n(rng), n(rng)).normalized();
}

inline sedtomo::Vec2 random_unit2(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * sedtomo::kPi);
  const double t = u(rng);
  return {std::cos(t), std::sin(t)};
}

}  // namespace testing
