#include "sedtomo/diffraction.hpp"

#include "sedtomo/parallel.hpp"

#include <gsl/gsl_sf_expint.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace sedtomo {

namespace {

constexpr double kAiryZero = 3.8317059702075123;

constexpr std::array<double, 8> kGLx = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLw = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};

}  // namespace

double Probe::aperture_radius() const {
  if (aperture > 0.0) return aperture;
  return kTwoPi / wavelength * 0.002;
}

double Probe::real_space_radius() const {
  if (radius > 0.0) return radius;
  return kAiryZero / aperture_radius();
}

Probe Probe::with_semi_angle(double wavelength, double semi_angle) {
  Probe p;
  p.wavelength = wavelength;
  p.aperture = kTwoPi / wavelength * semi_angle;
  return p;
}

DetectorGrid DetectorGrid::covering(double k_max, double pitch) {
  const int n = 2 * static_cast<int>(std::ceil(k_max / pitch)) + 1;
  return {n, n, pitch};
}

void PrecessionConfig::validate() const {
  if (!(alpha >= 0.0)) throw PreconditionError("precession angle must be non-negative");
  if (n_t < 1 || (n_t & (n_t - 1)) != 0) throw PreconditionError("n_t must be a power of two");
}

double DiffractionPattern::total() const {
  double s = 0.0;
  for (double v : intensity) s += v;
  return s;
}

double ewald_kz(double k_norm, double wavelength) {
  const double K = kTwoPi / wavelength;
  if (k_norm > K) throw OutsideSphereError("|k| exceeds the Ewald sphere radius 2pi/lambda");
  // K - sqrt(K^2 - k^2) rewritten to avoid cancellation.
  return k_norm * k_norm / (K + std::sqrt((K - k_norm) * (K + k_norm)));
}

Mat3 precession_rotation(double alpha, double t) {
  const double c = std::cos(t), s = std::sin(t), ca = std::cos(alpha), sa = std::sin(alpha);
  Mat3 a, b, d;
  a << c, s, 0, -s, c, 0, 0, 0, 1;
  b << 1, 0, 0, 0, ca, sa, 0, -sa, ca;
  d << c, -s, 0, s, c, 0, 0, 0, 1;
  return a * b * d;
}

double SpotShape::exact(double r, double rho, const Vec2& k) {
  // f(k) = (rho / r^2) int sinc(rho x) [Si(rho (ky + h)) - Si(rho (ky - h))] dx over the disk
  // chord, with x = kx + r sin(theta) and half-height h = r cos(theta).
  const int panels = std::max(16, static_cast<int>(std::ceil(4.0 * rho * r / kPi)));
  const double width = kPi / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = -0.5 * kPi + (p + 0.5) * width;
    for (std::size_t q = 0; q < kGLx.size(); ++q) {
      const double th = mid + 0.5 * width * kGLx[q];
      const double h = r * std::cos(th);
      const double x = k.x() + r * std::sin(th);
      const double inner = gsl_sf_Si(rho * (k.y() + h)) - gsl_sf_Si(rho * (k.y() - h));
      acc += 0.5 * width * kGLw[q] * sinc(rho * x) * inner * h;
    }
  }
  return rho / (r * r) * acc;
}

SpotShape::SpotShape(const Probe& probe, double rho, double step, double cutoff_c)
    : r_(probe.aperture_radius()), rho_(rho) {
  if (!(rho > 0.0)) throw PreconditionError("crystal width rho must be positive");
  support_ = r_ + cutoff_c / rho;
  step_ = step > 0.0 ? step : std::min(r_, kPi / rho) / 24.0;
  n_ = static_cast<int>(std::ceil(support_ / step_)) + 2;
  table_.assign(std::size_t(n_) * std::size_t(n_), 0.0);
  parallel_for(std::size_t(n_), 0, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t a = b; a < e; ++a)
      for (int c = 0; c <= int(a); ++c) {
        const Vec2 k(double(a) * step_, double(c) * step_);
        if (k.norm() > support_) continue;
        const double v = exact(r_, rho_, k);
        table_[a * std::size_t(n_) + std::size_t(c)] = v;
        table_[std::size_t(c) * std::size_t(n_) + a] = v;
      }
  });
}

double SpotShape::eval(double kx, double ky) const {
  kx = std::abs(kx);
  ky = std::abs(ky);
  if (kx * kx + ky * ky > support_ * support_) return 0.0;
  const double fx = kx / step_, fy = ky / step_;
  const int ix = std::min(int(fx), n_ - 2), iy = std::min(int(fy), n_ - 2);
  const double tx = fx - ix, ty = fy - iy;
  const double* row0 = &table_[std::size_t(ix) * std::size_t(n_)];
  const double* row1 = row0 + n_;
  return (1 - tx) * ((1 - ty) * row0[iy] + ty * row0[iy + 1]) + tx * ((1 - ty) * row1[iy] + ty * row1[iy + 1]);
}

BeamColumn column_from_field(const DeformationField& field, int ix, int iy) {
  const Grid& g = field.grid;
  if (ix < 0 || iy < 0 || ix >= g.n[0] || iy >= g.n[1]) throw PreconditionError("beam column outside the grid");
  BeamColumn col;
  col.rho = g.voxel;
  const Vec3 c0 = g.centre(ix, iy, 0);
  const Vec3 axis(c0.x(), c0.y(), 0.0);
  for (int k = 0; k < g.n[2]; ++k) {
    const std::size_t j = g.index(ix, iy, k);
    if (!field.support[j]) continue;
    col.A.push_back(field.A[j]);
    col.b.push_back(field.b[j] + field.A[j] * axis);
    col.z.push_back(g.centre(ix, iy, k).z());
  }
  return col;
}

BeamColumn column_along_ray(const DeformationField& field, const Mat3& frame, double u, double v,
                            const Vec3& centre) {
  const Grid& g = field.grid;
  BeamColumn col;
  col.rho = g.voxel;
  const Vec3 eu = frame.col(0), ev = frame.col(1), xi = frame.col(2);
  const Vec3 origin = centre + u * eu + v * ev;
  const double half = 0.5 * g.voxel;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!field.support[j]) continue;
    const Vec3 d = g.centre(j) - origin;
    if (std::abs(eu.dot(d)) > half || std::abs(ev.dot(d)) > half) continue;
    col.A.push_back(field.A[j] * frame);
    col.b.push_back(field.b[j] + field.A[j] * origin);
    col.z.push_back(xi.dot(d));
  }
  return col;
}

namespace {

struct Source {
  Vec2 centre;
  double zeta;
  double z;
  cplx coef;
};

enum class Model { Kinematical, HighEnergy };

struct Engine {
  const IdealCrystal& crystal;
  const BeamColumn& column;
  const DetectorGrid& outer;
  const SimulationOptions& opt;
  Model model;
  const SpotShape* shape;
  double aperture;
  double wavelength;

  DetectorGrid inner;
  std::vector<double> kz;
  std::vector<std::uint8_t> mask;
  bool use_mask = false;
  double radius = 0.0;

  Engine(const IdealCrystal& c, const BeamColumn& col, const DetectorGrid& g, const SimulationOptions& o, Model m,
         const SpotShape* s, double ap, double lambda)
      : crystal(c), column(col), outer(g), opt(o), model(m), shape(s), aperture(ap), wavelength(lambda) {
    const int ss = std::max(1, opt.supersample);
    inner = {outer.nx * ss, outer.ny * ss, outer.pitch / ss};
    radius = model == Model::Kinematical ? shape->support_radius() : aperture;
    if (model == Model::Kinematical) {
      kz.resize(inner.size());
      for (int j = 0; j < inner.ny; ++j)
        for (int i = 0; i < inner.nx; ++i) kz[inner.index(i, j)] = ewald_kz(inner.k(i, j), wavelength);
    }
    if (!opt.roi.empty()) {
      use_mask = true;
      mask.assign(inner.size(), 0);
      for (const auto& roi : opt.roi) {
        const int i0 = std::max(0, int(std::ceil(inner.fx(roi.centre.x() - roi.radius))));
        const int i1 = std::min(inner.nx - 1, int(std::floor(inner.fx(roi.centre.x() + roi.radius))));
        const int j0 = std::max(0, int(std::ceil(inner.fy(roi.centre.y() - roi.radius))));
        const int j1 = std::min(inner.ny - 1, int(std::floor(inner.fy(roi.centre.y() + roi.radius))));
        for (int j = j0; j <= j1; ++j)
          for (int i = i0; i <= i1; ++i)
            if ((inner.k(i, j) - roi.centre).norm() < roi.radius) mask[inner.index(i, j)] = 1;
      }
    }
  }

  bool touches_roi(const Vec2& c) const {
    if (!use_mask) return true;
    for (const auto& roi : opt.roi)
      if ((c - roi.centre).norm() < roi.radius + radius + inner.pitch) return true;
    return false;
  }

  std::vector<Source> sources(const Mat3& Rt, bool& truncated) const {
    std::vector<Source> out;
    const double kmax = outer.k_max();
    for (std::size_t j = 0; j < column.A.size(); ++j) {
      const Mat3 M = (column.A[j] * Rt).transpose();
      for (const Peak& pk : crystal.peaks) {
        if (pk.w == 0.0) continue;
        const Vec3 q = M * pk.p;
        if (model == Model::HighEnergy && std::abs(q.z()) > opt.z_tol) continue;
        const Vec2 c = q.head<2>();
        if (std::max(std::abs(c.x()), std::abs(c.y())) + radius > kmax) truncated = true;
        if (!touches_roi(c)) continue;
        out.push_back({c, q.z(), column.z[j], pk.w * std::polar(1.0, column.b[j].dot(pk.p))});
      }
    }
    return out;
  }

  void accumulate(const std::vector<Source>& src, int j0, int j1, std::vector<cplx>& amp) const {
    const double rho = column.rho;
    const double r2 = radius * radius;
    const double inv_ap2 = 1.0 / (aperture * aperture);
    for (const Source& s : src) {
      const int i_lo = std::max(0, int(std::ceil(inner.fx(s.centre.x() - radius))));
      const int i_hi = std::min(inner.nx - 1, int(std::floor(inner.fx(s.centre.x() + radius))));
      const int jl = std::max(j0, int(std::ceil(inner.fy(s.centre.y() - radius))));
      const int jh = std::min(j1 - 1, int(std::floor(inner.fy(s.centre.y() + radius))));
      for (int j = jl; j <= jh; ++j) {
        const double dy = inner.ky(j) - s.centre.y();
        for (int i = i_lo; i <= i_hi; ++i) {
          const double dx = inner.kx(i) - s.centre.x();
          if (dx * dx + dy * dy > r2) continue;
          const std::size_t p = inner.index(i, j);
          if (use_mask && !mask[p]) continue;
          cplx& a = amp[p - std::size_t(j0) * std::size_t(inner.nx)];
          if (model == Model::HighEnergy) {
            if (dx * dx + dy * dy < aperture * aperture) a += s.coef * inv_ap2;
            continue;
          }
          const double fv = shape->eval(dx, dy);
          if (fv == 0.0) continue;
          const double kappa = kz[p] - s.zeta;
          a += s.coef * (rho * sinc(rho * kappa) * fv) * std::polar(1.0, -s.z * kappa);
        }
      }
    }
  }

  DiffractionPattern run(const std::vector<Mat3>& rotations) const {
    std::vector<double> acc(inner.size(), 0.0);
    bool truncated = false;
    std::vector<std::vector<Source>> per_t;
    per_t.reserve(rotations.size());
    for (const Mat3& R : rotations) per_t.push_back(sources(R, truncated));

    parallel_for(std::size_t(inner.ny), opt.workers, [&](std::size_t b, std::size_t e, int) {
      const int j0 = int(b), j1 = int(e);
      std::vector<cplx> amp(std::size_t(j1 - j0) * std::size_t(inner.nx));
      for (const auto& src : per_t) {
        std::fill(amp.begin(), amp.end(), cplx(0.0));
        accumulate(src, j0, j1, amp);
        const std::size_t off = std::size_t(j0) * std::size_t(inner.nx);
        for (std::size_t p = 0; p < amp.size(); ++p) acc[off + p] += std::norm(amp[p]);
      }
    });

    const double inv_t = 1.0 / double(rotations.size());
    DiffractionPattern out;
    out.grid = outer;
    out.truncated = truncated;
    out.intensity.assign(outer.size(), 0.0);
    const int ss = std::max(1, opt.supersample);
    const double inv_ss = 1.0 / double(ss * ss);
    for (int j = 0; j < outer.ny; ++j)
      for (int i = 0; i < outer.nx; ++i) {
        double s = 0.0;
        for (int b = 0; b < ss; ++b)
          for (int a = 0; a < ss; ++a) s += acc[inner.index(i * ss + a, j * ss + b)];
        out.intensity[outer.index(i, j)] = rotations.size() == 1 && ss == 1 ? s : s * inv_t * inv_ss;
      }
    return out;
  }
};

void check_probe(const Probe& probe, double rho) {
  if (!(probe.wavelength > 0.0)) throw PreconditionError("wavelength must be positive");
  if (!(probe.real_space_radius() < rho))
    throw PreconditionError("probe radius " + std::to_string(probe.real_space_radius()) +
                            " Å is not smaller than the voxel width " + std::to_string(rho) + " Å");
}

std::vector<Mat3> precession_samples(const PrecessionConfig& prec) {
  prec.validate();
  if (prec.alpha == 0.0) return {Mat3::Identity()};
  std::vector<Mat3> r;
  for (int k = 0; k < prec.n_t; ++k) r.push_back(precession_rotation(prec.alpha, kTwoPi * k / prec.n_t));
  return r;
}

}  // namespace

DiffractionPattern simulate_pattern(const IdealCrystal& crystal, const BeamColumn& column, const Probe& probe,
                                    const DetectorGrid& grid, const SpotShape& shape,
                                    const SimulationOptions& opt) {
  check_probe(probe, column.rho);
  Engine e(crystal, column, grid, opt, Model::Kinematical, &shape, probe.aperture_radius(), probe.wavelength);
  return e.run({Mat3::Identity()});
}

DiffractionPattern simulate_precessed(const IdealCrystal& crystal, const BeamColumn& column, const Probe& probe,
                                      const DetectorGrid& grid, const SpotShape& shape,
                                      const PrecessionConfig& prec, const SimulationOptions& opt) {
  check_probe(probe, column.rho);
  Engine e(crystal, column, grid, opt, Model::Kinematical, &shape, probe.aperture_radius(), probe.wavelength);
  return e.run(precession_samples(prec));
}

DiffractionPattern simulate_high_energy(const IdealCrystal& crystal, const BeamColumn& column,
                                        const Probe& probe, const DetectorGrid& grid,
                                        const SimulationOptions& opt) {
  check_probe(probe, column.rho);
  Engine e(crystal, column, grid, opt, Model::HighEnergy, nullptr, probe.aperture_radius(), probe.wavelength);
  return e.run({Mat3::Identity()});
}

DiffractionPattern simulate_pattern(const IdealCrystal& crystal, const DeformationField& field, int ix, int iy,
                                    const Probe& probe, const DetectorGrid& grid,
                                    const SimulationOptions& opt) {
  const SpotShape shape(probe, field.grid.voxel);
  return simulate_pattern(crystal, column_from_field(field, ix, iy), probe, grid, shape, opt);
}

DiffractionPattern simulate_precessed(const IdealCrystal& crystal, const DeformationField& field, int ix, int iy,
                                      const Probe& probe, const DetectorGrid& grid,
                                      const PrecessionConfig& prec, const SimulationOptions& opt) {
  const SpotShape shape(probe, field.grid.voxel);
  return simulate_precessed(crystal, column_from_field(field, ix, iy), probe, grid, shape, prec, opt);
}

DiffractionPattern simulate_high_energy(const IdealCrystal& crystal, const DeformationField& field, int ix,
                                        int iy, const Probe& probe, const DetectorGrid& grid,
                                        const SimulationOptions& opt) {
  return simulate_high_energy(crystal, column_from_field(field, ix, iy), probe, grid, opt);
}

cplx affine_fourier_factor(const Mat3& A, const Vec3& b, const Vec3& K) {
  const Vec3 Kp = A.inverse().transpose() * K;
  return std::polar(1.0 / A.determinant(), b.dot(Kp));
}

}  // namespace sedtomo
