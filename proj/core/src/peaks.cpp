#include "sedtomo/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sedtomo {

double min_disk_separation(const IdealCrystal& crystal, const std::vector<long>& indices) {
  double best = std::numeric_limits<double>::infinity();
  for (long i : indices) {
    const Vec3& p = crystal.peaks.at(std::size_t(i)).p;
    for (std::size_t j = 0; j < crystal.peaks.size(); ++j) {
      if (long(j) == i || crystal.peaks[j].w == 0.0) continue;
      best = std::min(best, (crystal.peaks[j].p - p).norm());
    }
  }
  return best;
}

DiskSet make_disk_set(const IdealCrystal& crystal, const std::vector<long>& indices, double rbar) {
  if (indices.empty()) throw PreconditionError("disk set needs at least one peak");
  DiskSet d;
  for (long i : indices) {
    const Peak& p = crystal.peaks.at(std::size_t(i));
    d.reference.push_back(p.p.head<2>());
    d.peaks.push_back(p.p);
    d.index.push_back(i);
  }
  const double sep = min_disk_separation(crystal, indices);
  d.rbar = rbar > 0.0 ? rbar : 0.49 * sep;
  if (std::isfinite(sep) && !(2.0 * d.rbar < sep))
    throw PreconditionError("window radius " + std::to_string(d.rbar) + " overlaps neighbouring disks");
  return d;
}

std::vector<long> inner_ring(const IdealCrystal& crystal, double tol) {
  double rmin = std::numeric_limits<double>::infinity();
  for (const Peak& p : crystal.peaks)
    if (std::abs(p.p.z()) <= tol && p.w != 0.0 && p.p.norm() > 1e-12) rmin = std::min(rmin, p.p.norm());
  std::vector<long> out;
  for (std::size_t i = 0; i < crystal.peaks.size(); ++i) {
    const Peak& p = crystal.peaks[i];
    if (std::abs(p.p.z()) <= tol && p.w != 0.0 && std::abs(p.p.norm() - rmin) <= 1e-9 * rmin) out.push_back(long(i));
  }
  return out;
}

const char* method_name(CentreMethod m) { return m == CentreMethod::CentreOfMass ? "com" : "registered"; }

namespace {

struct Window {
  int i0, i1, j0, j1;
};

Window disk_window(const DetectorGrid& g, const Vec2& q, double r) {
  Window w{int(std::ceil(g.fx(q.x() - r))), int(std::floor(g.fx(q.x() + r))), int(std::ceil(g.fy(q.y() - r))),
           int(std::floor(g.fy(q.y() + r)))};
  if (w.i0 < 0 || w.j0 < 0 || w.i1 >= g.nx || w.j1 >= g.ny)
    throw PreconditionError("disk window extends beyond the detector");
  return w;
}

}  // namespace

CentreMeasurement detect_com(const DiffractionPattern& pattern, const DiskSet& disks) {
  const DetectorGrid& g = pattern.grid;
  CentreMeasurement out;
  out.method = CentreMethod::CentreOfMass;
  for (const Vec2& q : disks.reference) {
    const Window w = disk_window(g, q, disks.rbar);
    double mass = 0.0;
    Vec2 moment = Vec2::Zero();
    for (int j = w.j0; j <= w.j1; ++j)
      for (int i = w.i0; i <= w.i1; ++i) {
        const Vec2 k = g.k(i, j);
        if ((k - q).norm() >= disks.rbar) continue;
        const double v = pattern.at(i, j);
        mass += v;
        moment += v * (k - q);
      }
    if (!(mass > 0.0)) throw EmptyDiskError("no intensity inside the disk window");
    out.centre.push_back(q + moment / mass);
    out.mass.push_back(mass);
  }
  return out;
}

namespace {

/// Offset of the minimum of a quadratic fitted to a 3x3 loss patch, in pixels.
Vec2 quadratic_refine(const double L[3][3]) {
  // Least squares for c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2 on x, y in {-1,0,1}.
  Eigen::Matrix<double, 9, 6> M;
  Eigen::Matrix<double, 9, 1> rhs;
  int r = 0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b, ++r) {
      M.row(r) << 1, a, b, a * a, a * b, b * b;
      rhs[r] = L[a + 1][b + 1];
    }
  const Eigen::Matrix<double, 6, 1> c = M.colPivHouseholderQr().solve(rhs);
  Mat2 H;
  H << 2 * c[3], c[4], c[4], 2 * c[5];
  const Vec2 grad(c[1], c[2]);
  Eigen::SelfAdjointEigenSolver<Mat2> es(H);
  if (es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    const Vec2 s = -H.ldlt().solve(grad);
    if (s.cwiseAbs().maxCoeff() <= 1.0) return s;
  }
  // Fall back to independent parabolas through the axis neighbours.
  Vec2 s = Vec2::Zero();
  const double dx = L[0][1] - 2 * L[1][1] + L[2][1];
  const double dy = L[1][0] - 2 * L[1][1] + L[1][2];
  if (dx > 0) s.x() = std::clamp(0.5 * (L[0][1] - L[2][1]) / dx, -0.5, 0.5);
  if (dy > 0) s.y() = std::clamp(0.5 * (L[1][0] - L[1][2]) / dy, -0.5, 0.5);
  return s;
}

}  // namespace

CentreMeasurement detect_registered(const DiffractionPattern& pattern, const DiffractionPattern& reference,
                                    const DiskSet& disks, const RegistrationOptions& opt) {
  const DetectorGrid& g = pattern.grid;
  if (g.nx != reference.grid.nx || g.ny != reference.grid.ny || g.pitch != reference.grid.pitch)
    throw ShapeMismatchError("pattern and reference detectors differ");
  const double max_shift = opt.max_shift > 0.0 ? opt.max_shift : disks.rbar;
  const int S = int(std::floor(max_shift / g.pitch + 1e-9));

  CentreMeasurement out;
  out.method = CentreMethod::Registered;
  for (const Vec2& q : disks.reference) {
    const Window w = disk_window(g, q, disks.rbar);
    std::vector<std::pair<int, int>> pix;
    double mass = 0.0, energy = 0.0;
    for (int j = w.j0; j <= w.j1; ++j)
      for (int i = w.i0; i <= w.i1; ++i)
        if ((g.k(i, j) - q).norm() < disks.rbar) {
          pix.emplace_back(i, j);
          mass += pattern.at(i, j);
          energy += pattern.at(i, j) * pattern.at(i, j);
        }

    const int n = 2 * S + 1;
    std::vector<double> loss(std::size_t(n) * std::size_t(n), std::numeric_limits<double>::infinity());
    auto at = [&](int a, int b) -> double& { return loss[std::size_t(a + S) * std::size_t(n) + std::size_t(b + S)]; };
    double ref_energy = 0.0;
    int best_a = 0, best_b = 0;
    double best = std::numeric_limits<double>::infinity(), worst = 0.0;
    for (int a = -S; a <= S; ++a)
      for (int b = -S; b <= S; ++b) {
        if (double(a * a + b * b) * g.pitch * g.pitch > max_shift * max_shift + 1e-12) continue;
        double s = 0.0, e0 = 0.0;
        for (const auto& [i, j] : pix) {
          const int ii = i - a, jj = j - b;
          const double r = (ii >= 0 && jj >= 0 && ii < g.nx && jj < g.ny) ? reference.at(ii, jj) : 0.0;
          const double diff = pattern.at(i, j) - r;
          s += diff * diff;
          e0 += r * r;
        }
        at(a, b) = s;
        ref_energy = std::max(ref_energy, e0);
        worst = std::max(worst, s);
        if (s < best) {
          best = s;
          best_a = a;
          best_b = b;
        }
      }
    if (!(mass > 0.0) || !(ref_energy > 0.0) || !(worst - best > 1e-12 * (energy + ref_energy)))
      throw NoDiskError("registration loss is flat: no disk in the window");

    Vec2 shift(best_a, best_b);
    if (opt.subpixel) {
      double patch[3][3] = {};
      bool complete = true;
      for (int da = -1; da <= 1; ++da)
        for (int db = -1; db <= 1; ++db) {
          const int a = best_a + da, b = best_b + db;
          if (std::abs(a) > S || std::abs(b) > S || !std::isfinite(at(a, b))) {
            complete = false;
            continue;
          }
          patch[da + 1][db + 1] = at(a, b);
        }
      if (complete) shift += quadratic_refine(patch);
    }
    out.centre.push_back(q + g.pitch * shift);
    out.mass.push_back(mass);
  }
  return out;
}

Mat2 centres_to_tensor(const std::vector<Vec2>& centres, const DiskSet& disks) {
  if (centres.size() != disks.reference.size()) throw ShapeMismatchError("centre count differs from disk count");
  Mat2 QQ = Mat2::Zero(), CQ = Mat2::Zero();
  for (std::size_t i = 0; i < centres.size(); ++i) {
    QQ += disks.reference[i] * disks.reference[i].transpose();
    CQ += centres[i] * disks.reference[i].transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat2> es(QQ);
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * lmax)
    throw RankDeficientError("reference peaks are colinear");
  return CQ * QQ.inverse();
}

Mat3 embed_projection(const Mat2& t2, const Vec3& xi, const Mat32& frame) {
  const Mat2 gram = frame.transpose() * frame;
  if ((gram - Mat2::Identity()).cwiseAbs().maxCoeff() > 1e-9 || (frame.transpose() * xi).cwiseAbs().maxCoeff() > 1e-9)
    throw PreconditionError("frame must be orthonormal and orthogonal to the beam direction");
  return frame * t2 * frame.transpose();
}

double recommend_alpha(double sigma, double wavelength, double P) {
  const double s = wavelength * P / (4.0 * kPi);
  const double c = 1.0 - 0.5 * sigma * sigma;
  if (!(std::abs(s) <= 1.0) || !(c >= -1.0 && c <= 1.0))
    throw PreconditionError("precession rule arguments out of range");
  return std::acos(c) + std::asin(s);
}

double relative_error(const Vec2& c_true, const Vec2& c) {
  const double n = c_true.norm();
  if (!(n > 0.0)) throw PreconditionError("reference centre is zero");
  return 100.0 * (c_true - c).norm() / n;
}

}  // namespace sedtomo
