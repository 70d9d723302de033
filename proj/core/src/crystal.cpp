#include "sedtomo/crystal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sedtomo {

namespace {

void check_volume(double v, double scale) {
  if (!std::isfinite(v) || std::abs(v) <= 1e-12 * scale)
    throw DegenerateLatticeError("lattice basis is degenerate (volume " + std::to_string(v) + ")");
}

}  // namespace

Mat3 DirectLattice::matrix() const {
  Mat3 m;
  m.col(0) = a;
  m.col(1) = b;
  m.col(2) = c;
  return m;
}

double DirectLattice::volume() const { return a.dot(b.cross(c)); }

Mat3 ReciprocalLattice::matrix() const {
  Mat3 m;
  m.col(0) = a_star;
  m.col(1) = b_star;
  m.col(2) = c_star;
  return m;
}

double ReciprocalLattice::volume() const { return a_star.dot(b_star.cross(c_star)); }

Vec3 ReciprocalLattice::point(const Miller& hkl) const {
  return hkl[0] * a_star + hkl[1] * b_star + hkl[2] * c_star;
}

ReciprocalLattice reciprocal_from_direct(const DirectLattice& lat) {
  const double v = lat.volume();
  check_volume(v, lat.a.norm() * lat.b.norm() * lat.c.norm());
  const double s = kTwoPi / v;
  return {s * lat.b.cross(lat.c), s * lat.c.cross(lat.a), s * lat.a.cross(lat.b)};
}

DirectLattice direct_from_reciprocal(const ReciprocalLattice& rec) {
  const double v = rec.volume();
  check_volume(v, rec.a_star.norm() * rec.b_star.norm() * rec.c_star.norm());
  const double s = kTwoPi / v;
  return {s * rec.b_star.cross(rec.c_star), s * rec.c_star.cross(rec.a_star),
          s * rec.a_star.cross(rec.b_star)};
}

WeightModel WeightModel::unit() {
  WeightModel m;
  m.kind = Kind::Unit;
  return m;
}

WeightModel WeightModel::gaussian(double s) {
  if (!(s > 0.0)) throw PreconditionError("Gaussian weight width must be positive");
  WeightModel m;
  m.kind = Kind::Gaussian;
  m.s = s;
  return m;
}

WeightModel WeightModel::from_table(std::map<Miller, cplx> table, double envelope_s) {
  WeightModel m;
  m.kind = Kind::Table;
  m.envelope_s = envelope_s;
  for (const auto& [hkl, w] : table) {
    const Miller neg{-hkl[0], -hkl[1], -hkl[2]};
    auto it = table.find(neg);
    if (it != table.end() && std::abs(it->second - std::conj(w)) > 1e-12 * (1.0 + std::abs(w)))
      throw ConfigError("weight table violates w(-p) = conj(w(p))");
  }
  m.table = table;
  for (const auto& [hkl, w] : table) m.table.emplace(Miller{-hkl[0], -hkl[1], -hkl[2]}, std::conj(w));
  return m;
}

cplx WeightModel::weight(const Miller& hkl, const Vec3& p) const {
  switch (kind) {
    case Kind::Unit:
      return 1.0;
    case Kind::Gaussian:
      return std::exp(-p.squaredNorm() / (2.0 * s * s));
    case Kind::Table: {
      auto it = table.find(hkl);
      if (it == table.end()) return 0.0;
      const double env = envelope_s > 0.0 ? std::exp(-p.squaredNorm() / (2.0 * envelope_s * envelope_s)) : 1.0;
      return env * it->second;
    }
  }
  return 0.0;
}

long IdealCrystal::find(const Miller& hkl) const {
  for (std::size_t i = 0; i < peaks.size(); ++i)
    if (peaks[i].hkl == hkl) return static_cast<long>(i);
  return -1;
}

IdealCrystal enumerate_peaks(const ReciprocalLattice& rec, double cutoff, const WeightModel& model,
                             std::size_t max_peaks) {
  if (!(cutoff > 0.0)) throw PreconditionError("cutoff must be positive");
  const DirectLattice lat = direct_from_reciprocal(rec);

  // h = <p, a>/2pi, so |h| <= cutoff |a| / 2pi.
  const long H = static_cast<long>(std::floor(cutoff * lat.a.norm() / kTwoPi + 1e-9));
  const long K = static_cast<long>(std::floor(cutoff * lat.b.norm() / kTwoPi + 1e-9));
  const long L = static_cast<long>(std::floor(cutoff * lat.c.norm() / kTwoPi + 1e-9));
  const double expected = 4.0 / 3.0 * kPi * cutoff * cutoff * cutoff / std::abs(rec.volume());
  const double box = double(2 * H + 1) * double(2 * K + 1) * double(2 * L + 1);
  if (expected > 2.0 * double(max_peaks) || box > 64.0 * double(max_peaks) + 1e6)
    throw ResourceLimitError("peak enumeration exceeds the configured limit of " + std::to_string(max_peaks));

  IdealCrystal out;
  out.reciprocal = rec;
  out.cutoff_radius = cutoff;
  const double c2 = cutoff * cutoff;
  for (long h = -H; h <= H; ++h)
    for (long k = -K; k <= K; ++k)
      for (long l = -L; l <= L; ++l) {
        const Miller hkl{int(h), int(k), int(l)};
        const Vec3 p = rec.point(hkl);
        if (p.squaredNorm() > c2) continue;
        out.peaks.push_back({p, model.weight(hkl, p), hkl});
        if (out.peaks.size() > max_peaks)
          throw ResourceLimitError("peak enumeration exceeds the configured limit of " +
                                   std::to_string(max_peaks));
      }
  std::stable_sort(out.peaks.begin(), out.peaks.end(), [](const Peak& x, const Peak& y) {
    const double nx = x.p.squaredNorm(), ny = y.p.squaredNorm();
    if (std::abs(nx - ny) > 1e-12 * (1.0 + nx)) return nx < ny;
    return x.hkl < y.hkl;
  });
  return out;
}

Mat3 zone_axis_rotation(const Vec3& zone) {
  const double n = zone.norm();
  if (!(n > 0.0)) throw PreconditionError("zone axis must be non-zero");
  const Vec3 z = zone / n;
  // First lab axis: the crystal axis least aligned with the zone, orthogonalised.
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(z[i]) < std::abs(z[best]) - 1e-12) best = i;
  Vec3 x = Vec3::Unit(best) - z[best] * z;
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  return R;
}

ReciprocalLattice rotate(const ReciprocalLattice& rec, const Mat3& R) {
  return {R * rec.a_star, R * rec.b_star, R * rec.c_star};
}

DirectLattice rotate(const DirectLattice& lat, const Mat3& R) { return {R * lat.a, R * lat.b, R * lat.c}; }

cplx diamond_structure_factor(const Miller& hkl) {
  const int h = hkl[0], k = hkl[1], l = hkl[2];
  auto e = [](int n) { return std::polar(1.0, kPi * 0.5 * n); };
  const cplx basis = 1.0 + e(h + k + l);
  const cplx fcc = 1.0 + e(2 * (h + k)) + e(2 * (h + l)) + e(2 * (k + l));
  cplx f = basis * fcc / 8.0;
  // The factors are products of powers of i; snap rounding noise.
  f = {std::round(f.real() * 8.0) / 8.0, std::round(f.imag() * 8.0) / 8.0};
  return f;
}

IdealCrystal silicon(SiliconZone zone, double cutoff, double envelope_s) {
  const double a = kSiliconLatticeConstant;
  const DirectLattice cubic{Vec3(a, 0, 0), Vec3(0, a, 0), Vec3(0, 0, a)};
  const Vec3 axis = zone == SiliconZone::Z001 ? Vec3(0, 0, 1) : Vec3(0, 1, 1);
  const Mat3 R = zone_axis_rotation(axis);
  const ReciprocalLattice rec = rotate(reciprocal_from_direct(cubic), R);

  const int n = static_cast<int>(std::floor(cutoff * a / kTwoPi)) + 1;
  std::map<Miller, cplx> table;
  for (int h = -n; h <= n; ++h)
    for (int k = -n; k <= n; ++k)
      for (int l = -n; l <= n; ++l) {
        const Miller hkl{h, k, l};
        const cplx f = diamond_structure_factor(hkl);
        if (std::abs(f) > 0.0) table.emplace(hkl, f);
      }
  IdealCrystal all = enumerate_peaks(rec, cutoff, WeightModel::from_table(std::move(table), envelope_s));
  IdealCrystal out = all;
  out.peaks.clear();
  for (const Peak& p : all.peaks)
    if (std::abs(p.w) > 0.0) out.peaks.push_back(p);
  return out;
}

}  // namespace sedtomo
