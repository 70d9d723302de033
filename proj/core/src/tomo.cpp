#include "sedtomo/tomo.hpp"

#include "sedtomo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sedtomo {

Mat3 Tilt::frame() const {
  Mat3 m;
  m.col(0) = eu;
  m.col(1) = ev;
  m.col(2) = xi;
  return m;
}

Mat32 Tilt::plane() const {
  Mat32 m;
  m.col(0) = eu;
  m.col(1) = ev;
  return m;
}

Tilt make_tilt(const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0)) throw PreconditionError("tilt direction must be non-zero");
  Tilt t;
  t.xi = direction / n;
  Vec3 u = Vec3::UnitX() - t.xi.x() * t.xi;
  if (u.norm() < 1e-6) u = Vec3::UnitY() - t.xi.y() * t.xi;
  t.eu = u.normalized();
  t.ev = t.xi.cross(t.eu);
  return t;
}

Vec3 AcquisitionGeometry::ray_origin(std::size_t r) const {
  const Tilt& t = ray_tilt(r);
  const std::size_t k = r % scan.size();
  const int a = int(k / std::size_t(scan.nv)), b = int(k % std::size_t(scan.nv));
  return centre + scan.u(a) * t.eu + scan.v(b) * t.ev;
}

void AcquisitionGeometry::validate() const {
  for (const Tilt& t : tilts) {
    if (std::abs(t.xi.norm() - 1.0) > 1e-9) throw PreconditionError("tilt direction is not a unit vector");
    if (std::acos(std::clamp(std::abs(t.xi.z()), 0.0, 1.0)) > tilt_limit + 1e-9)
      throw PreconditionError("tilt exceeds the tilt limit");
    const Mat32 P = t.plane();
    if ((P.transpose() * P - Mat2::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        (P.transpose() * t.xi).cwiseAbs().maxCoeff() > 1e-9)
      throw PreconditionError("tilt frame is not orthonormal");
  }
  if (scan.nu < 1 || scan.nv < 1 || !(scan.pitch > 0.0)) throw PreconditionError("invalid scan grid");
}

TensorSinogram TensorSinogram::zeros(const AcquisitionGeometry& g) {
  TensorSinogram s;
  s.n_tilts = g.tilts.size();
  s.nu = g.scan.nu;
  s.nv = g.scan.nv;
  s.data.assign(g.rays(), Mat3::Zero());
  s.mask.assign(g.rays(), 1);
  return s;
}

bool TensorSinogram::conforms(const AcquisitionGeometry& g) const {
  return n_tilts == g.tilts.size() && nu == g.scan.nu && nv == g.scan.nv && data.size() == g.rays() &&
         mask.size() == g.rays();
}

RaySamples ray_samples(const Grid& grid, const Vec3& origin, const Vec3& xi) {
  const double step = 0.5 * grid.voxel;
  double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = grid.origin[a] - grid.voxel, hi = grid.origin[a] + grid.n[a] * grid.voxel;
    if (std::abs(xi[a]) < 1e-15) {
      if (origin[a] <= lo || origin[a] >= hi) return {step, 1, 0};
      continue;
    }
    double ta = (lo - origin[a]) / xi[a], tb = (hi - origin[a]) / xi[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return {step, 1, 0};
  return {step, long(std::ceil(t0 / step)), long(std::floor(t1 / step))};
}

int trilinear(const Grid& grid, const Vec3& x, std::size_t idx[8], double w[8]) {
  const Vec3 g = (x - grid.origin) / grid.voxel;
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double fl = std::floor(g[a]);
    i0[a] = int(fl);
    f[a] = g[a] - fl;
  }
  int n = 0;
  for (int c = 0; c < 8; ++c) {
    const int di = c >> 2, dj = (c >> 1) & 1, dk = c & 1;
    const int i = i0[0] + di, j = i0[1] + dj, k = i0[2] + dk;
    if (i < 0 || j < 0 || k < 0 || i >= grid.n[0] || j >= grid.n[1] || k >= grid.n[2]) continue;
    const double wt = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) * (dk ? f[2] : 1 - f[2]);
    if (wt == 0.0) continue;
    idx[n] = grid.index(i, j, k);
    w[n] = wt;
    ++n;
  }
  return n;
}

namespace {

template <class T, class Acc>
T integrate_ray(const Volume<T>& vol, const Vec3& origin, const Vec3& xi, Acc zero) {
  const RaySamples rs = ray_samples(vol.grid, origin, xi);
  T acc = zero;
  std::size_t idx[8];
  double w[8];
  for (long m = rs.m0; m <= rs.m1; ++m) {
    const int n = trilinear(vol.grid, origin + (double(m) * rs.step) * xi, idx, w);
    for (int c = 0; c < n; ++c) acc += w[c] * vol.data[idx[c]];
  }
  return acc * rs.step;
}

}  // namespace

TensorSinogram trt_forward(const TensorVolume& F, const AcquisitionGeometry& geom, int workers) {
  TensorSinogram out = TensorSinogram::zeros(geom);
  parallel_for(geom.rays(), workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t r = b; r < e; ++r) {
      const Vec3& xi = geom.ray_tilt(r).xi;
      const Mat3 P = transverse_projector(xi);
      out.data[r] = P * integrate_ray(F, geom.ray_origin(r), xi, Mat3::Zero().eval()) * P;
    }
  });
  return out;
}

TensorVolume trt_adjoint(const TensorSinogram& d, const AcquisitionGeometry& geom, const Grid& grid, int workers) {
  if (!d.conforms(geom)) throw ShapeMismatchError("sinogram does not match the acquisition geometry");
  return RayOperator(grid, geom, workers).adjoint(d);
}

ScalarSinogram lrt_forward(const VectorVolume& f, const AcquisitionGeometry& geom, int workers) {
  ScalarSinogram out{geom.tilts.size(), geom.scan.nu, geom.scan.nv, std::vector<double>(geom.rays(), 0.0)};
  parallel_for(geom.rays(), workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t r = b; r < e; ++r) {
      const Vec3& xi = geom.ray_tilt(r).xi;
      out.data[r] = integrate_ray(f, geom.ray_origin(r), xi, Vec3::Zero().eval()).dot(xi);
    }
  });
  return out;
}

ScalarSinogram ray_integrals(const ScalarVolume& s, const AcquisitionGeometry& geom, int workers) {
  ScalarSinogram out{geom.tilts.size(), geom.scan.nu, geom.scan.nv, std::vector<double>(geom.rays(), 0.0)};
  parallel_for(geom.rays(), workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t r = b; r < e; ++r)
      out.data[r] = integrate_ray(s, geom.ray_origin(r), geom.ray_tilt(r).xi, 0.0);
  });
  return out;
}

RayOperator::RayOperator(const Grid& grid, const AcquisitionGeometry& geom, int workers)
    : grid_(grid), geom_(geom), workers_(workers) {
  if (grid.size() >= std::numeric_limits<std::uint32_t>::max() || geom.rays() >= std::numeric_limits<std::uint32_t>::max())
    throw ResourceLimitError("ray operator is limited to 2^32 voxels and rays");
  const std::size_t R = geom.rays();
  proj_.resize(R);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(R);
  parallel_for(R, workers, [&](std::size_t b, std::size_t e, int) {
    std::vector<std::pair<std::uint32_t, double>> tmp;
    for (std::size_t r = b; r < e; ++r) {
      const Vec3& xi = geom.ray_tilt(r).xi;
      proj_[r] = transverse_projector(xi);
      const Vec3 o = geom.ray_origin(r);
      const RaySamples rs = ray_samples(grid, o, xi);
      tmp.clear();
      std::size_t idx[8];
      double w[8];
      for (long m = rs.m0; m <= rs.m1; ++m) {
        const int n = trilinear(grid, o + (double(m) * rs.step) * xi, idx, w);
        for (int c = 0; c < n; ++c) tmp.emplace_back(std::uint32_t(idx[c]), w[c] * rs.step);
      }
      std::sort(tmp.begin(), tmp.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
      auto& row = rows[r];
      for (const auto& [c, v] : tmp) {
        if (!row.empty() && row.back().first == c)
          row.back().second += v;
        else
          row.emplace_back(c, v);
      }
    }
  });

  row_ptr_.assign(R + 1, 0);
  for (std::size_t r = 0; r < R; ++r) row_ptr_[r + 1] = row_ptr_[r] + rows[r].size();
  col_.resize(row_ptr_[R]);
  val_.resize(row_ptr_[R]);
  for (std::size_t r = 0; r < R; ++r) {
    std::size_t k = row_ptr_[r];
    for (const auto& [c, v] : rows[r]) {
      col_[k] = c;
      val_[k] = v;
      ++k;
    }
    std::vector<std::pair<std::uint32_t, double>>().swap(rows[r]);
  }

  const std::size_t V = grid.size();
  t_ptr_.assign(V + 1, 0);
  for (std::uint32_t c : col_) ++t_ptr_[std::size_t(c) + 1];
  std::partial_sum(t_ptr_.begin(), t_ptr_.end(), t_ptr_.begin());
  t_row_.resize(col_.size());
  t_val_.resize(col_.size());
  std::vector<std::size_t> fill(t_ptr_.begin(), t_ptr_.end() - 1);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t pos = fill[col_[k]]++;
      t_row_[pos] = std::uint32_t(r);
      t_val_[pos] = val_[k];
    }
}

void RayOperator::forward(const std::vector<Mat3>& F, std::vector<Mat3>& out) const {
  if (F.size() != grid_.size()) throw ShapeMismatchError("volume does not match the operator grid");
  out.resize(geom_.rays());
  parallel_for(geom_.rays(), workers_, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t r = b; r < e; ++r) {
      Mat3 acc = Mat3::Zero();
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += val_[k] * F[col_[k]];
      out[r] = proj_[r] * acc * proj_[r];
    }
  });
}

void RayOperator::adjoint(const std::vector<Mat3>& d, const std::vector<std::uint8_t>& mask,
                          std::vector<Mat3>& out) const {
  if (d.size() != geom_.rays() || mask.size() != geom_.rays())
    throw ShapeMismatchError("sinogram does not match the operator geometry");
  std::vector<Mat3> pd(d.size());
  parallel_for(d.size(), workers_, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t r = b; r < e; ++r) pd[r] = mask[r] ? (proj_[r] * d[r] * proj_[r]).eval() : Mat3::Zero().eval();
  });
  out.resize(grid_.size());
  parallel_for(grid_.size(), workers_, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t v = b; v < e; ++v) {
      Mat3 acc = Mat3::Zero();
      for (std::size_t k = t_ptr_[v]; k < t_ptr_[v + 1]; ++k) acc += t_val_[k] * pd[t_row_[k]];
      out[v] = acc;
    }
  });
}

TensorSinogram RayOperator::forward(const TensorVolume& F) const {
  TensorSinogram s = TensorSinogram::zeros(geom_);
  forward(F.data, s.data);
  return s;
}

TensorVolume RayOperator::adjoint(const TensorSinogram& d) const {
  if (!d.conforms(geom_)) throw ShapeMismatchError("sinogram does not match the acquisition geometry");
  TensorVolume v(grid_, Mat3::Zero());
  adjoint(d.data, d.mask, v.data);
  return v;
}

TensorVolume gauge_field(const ScalarVolume& phi) {
  const Grid& g = phi.grid;
  TensorVolume out(g, Mat3::Zero());
  auto val = [&](int i, int j, int k) -> double {
    if (i < 0 || j < 0 || k < 0 || i >= g.n[0] || j >= g.n[1] || k >= g.n[2]) return 0.0;
    return phi.data[g.index(i, j, k)];
  };
  const double s = 0.5 / g.voxel;
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        const Vec3 grad(s * (val(i + 1, j, k) - val(i - 1, j, k)), s * (val(i, j + 1, k) - val(i, j - 1, k)),
                        s * (val(i, j, k + 1) - val(i, j, k - 1)));
        out.data[g.index(i, j, k)] = cross_matrix(grad);
      }
  return out;
}

std::vector<Vec3> zone_axis_directions(const DirectLattice& lattice, double tilt_limit, int max_index) {
  if (!(tilt_limit >= 0.0 && tilt_limit <= kPi / 2 + 1e-12)) throw PreconditionError("tilt limit must lie in [0, 90°]");
  std::vector<Vec3> dirs;
  const Mat3 B = lattice.matrix();
  for (int a = -max_index; a <= max_index; ++a)
    for (int b = -max_index; b <= max_index; ++b)
      for (int c = -max_index; c <= max_index; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        Vec3 v = (B * Vec3(a, b, c)).normalized();
        if (v.z() < 0 || (v.z() == 0 && (v.x() < 0 || (v.x() == 0 && v.y() < 0)))) v = -v;
        if (std::acos(std::clamp(v.z(), -1.0, 1.0)) > tilt_limit + 1e-12) continue;
        bool dup = false;
        for (const Vec3& w : dirs)
          if ((w - v).norm() < 1e-9) {
            dup = true;
            break;
          }
        if (!dup) dirs.push_back(v);
      }
  std::sort(dirs.begin(), dirs.end(), [](const Vec3& x, const Vec3& y) {
    const double tx = std::acos(std::clamp(x.z(), -1.0, 1.0)), ty = std::acos(std::clamp(y.z(), -1.0, 1.0));
    if (std::abs(tx - ty) > 1e-12) return tx < ty;
    return std::atan2(x.y(), x.x()) < std::atan2(y.y(), y.x());
  });
  return dirs;
}

AcquisitionGeometry zone_axis_geometry(const IdealCrystal& crystal, double tilt_limit, int max_index,
                                       const ScanGrid& scan, const Vec3& centre) {
  AcquisitionGeometry g;
  g.scan = scan;
  g.centre = centre;
  g.tilt_limit = tilt_limit;
  for (const Vec3& d : zone_axis_directions(crystal.direct(), tilt_limit, max_index)) g.tilts.push_back(make_tilt(d));
  g.validate();
  return g;
}

Vec2 stereographic(const Vec3& direction) {
  Vec3 v = direction.normalized();
  if (v.z() > 0) v = -v;
  return Vec2(v.x() / (1.0 - v.z()), v.y() / (1.0 - v.z()));
}

std::vector<Vec3> fibonacci_directions(int n) {
  std::vector<Vec3> out;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return out;
}

TensorSinogram thickness_rescale(const TensorSinogram& averages, const std::vector<double>& thickness) {
  if (thickness.size() != averages.size()) throw ShapeMismatchError("thickness map does not match the sinogram");
  TensorSinogram out = averages;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (thickness[r] < 0.0) throw PreconditionError("negative thickness");
    if (thickness[r] == 0.0) {
      out.mask[r] = 0;
      out.data[r] = Mat3::Zero();
    } else {
      out.data[r] = thickness[r] * averages.data[r];
    }
  }
  return out;
}

}  // namespace sedtomo
