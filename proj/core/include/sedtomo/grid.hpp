#pragma once

#include "sedtomo/common.hpp"

#include <array>
#include <cstddef>

namespace sedtomo {

/// Regular voxel grid; `origin` is the centre of voxel (0,0,0). Storage is C-order over (x,y,z).
struct Grid {
  std::array<int, 3> n{1, 1, 1};
  double voxel = 1.0;
  Vec3 origin = Vec3::Zero();

  std::size_t size() const { return std::size_t(n[0]) * std::size_t(n[1]) * std::size_t(n[2]); }
  std::size_t index(int i, int j, int k) const {
    return (std::size_t(i) * std::size_t(n[1]) + std::size_t(j)) * std::size_t(n[2]) + std::size_t(k);
  }
  std::array<int, 3> unravel(std::size_t idx) const {
    const int k = int(idx % std::size_t(n[2]));
    idx /= std::size_t(n[2]);
    return {int(idx / std::size_t(n[1])), int(idx % std::size_t(n[1])), k};
  }
  Vec3 centre(int i, int j, int k) const { return origin + voxel * Vec3(i, j, k); }
  Vec3 centre(std::size_t idx) const {
    const auto c = unravel(idx);
    return centre(c[0], c[1], c[2]);
  }
  /// Centre of the whole box.
  Vec3 box_centre() const { return origin + 0.5 * voxel * Vec3(n[0] - 1, n[1] - 1, n[2] - 1); }

  /// Grid whose box is centred at the origin.
  static Grid centred(std::array<int, 3> n, double voxel) {
    Grid g;
    g.n = n;
    g.voxel = voxel;
    g.origin = -0.5 * voxel * Vec3(n[0] - 1, n[1] - 1, n[2] - 1);
    return g;
  }

  bool operator==(const Grid& o) const { return n == o.n && voxel == o.voxel && origin == o.origin; }
};

}  // namespace sedtomo
