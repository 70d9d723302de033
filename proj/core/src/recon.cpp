#include "sedtomo/recon.hpp"

#include "sedtomo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sedtomo {

TensorSinogram add_noise(const TensorSinogram& d, const AcquisitionGeometry& geom, double level, std::uint64_t seed) {
  if (!d.conforms(geom)) throw ShapeMismatchError("sinogram does not match the acquisition geometry");
  if (!(level >= 0.0)) throw PreconditionError("noise level must be non-negative");
  TensorSinogram out = d;
  if (level == 0.0) return out;
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < d.size(); ++r)
    if (d.mask[r]) {
      ss += d.data[r].squaredNorm();
      ++n;
    }
  if (n == 0) return out;
  const double scale = level * std::sqrt(ss / (9.0 * double(n)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < d.size(); ++r) {
    Mat3 eta;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) eta(a, b) = normal(rng);
    if (!d.mask[r]) continue;
    const Mat3 P = transverse_projector(geom.ray_tilt(r).xi);
    out.data[r] += scale * (P * eta * P);
  }
  return out;
}

void tensor_gradient(const Grid& g, const std::vector<Mat3>& F, std::vector<std::array<Mat3, 3>>& out) {
  out.resize(g.size());
  const double inv_h = 1.0 / g.voxel;
  const std::size_t sx = std::size_t(g.n[1]) * std::size_t(g.n[2]), sy = std::size_t(g.n[2]);
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        const std::size_t v = g.index(i, j, k);
        auto& o = out[v];
        o[0] = i + 1 < g.n[0] ? ((F[v + sx] - F[v]) * inv_h).eval() : Mat3::Zero().eval();
        o[1] = j + 1 < g.n[1] ? ((F[v + sy] - F[v]) * inv_h).eval() : Mat3::Zero().eval();
        o[2] = k + 1 < g.n[2] ? ((F[v + 1] - F[v]) * inv_h).eval() : Mat3::Zero().eval();
      }
}

void tensor_divergence(const Grid& g, const std::vector<std::array<Mat3, 3>>& p, std::vector<Mat3>& out) {
  out.resize(g.size());
  const double inv_h = 1.0 / g.voxel;
  const std::size_t sx = std::size_t(g.n[1]) * std::size_t(g.n[2]), sy = std::size_t(g.n[2]);
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        const std::size_t v = g.index(i, j, k);
        Mat3 acc = Mat3::Zero();
        if (i + 1 < g.n[0]) acc += p[v][0];
        if (i > 0) acc -= p[v - sx][0];
        if (j + 1 < g.n[1]) acc += p[v][1];
        if (j > 0) acc -= p[v - sy][1];
        if (k + 1 < g.n[2]) acc += p[v][2];
        if (k > 0) acc -= p[v - 1][2];
        out[v] = acc * inv_h;
      }
}

namespace {

double dot(const std::vector<Mat3>& a, const std::vector<Mat3>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].array() * b[i].array()).sum();
  return s;
}

double norm(const std::vector<Mat3>& a) { return std::sqrt(dot(a, a)); }

double tv_value(const Grid& g, const std::vector<Mat3>& F) {
  std::vector<std::array<Mat3, 3>> grad;
  tensor_gradient(g, F, grad);
  double s = 0.0;
  for (const auto& q : grad) s += std::sqrt(q[0].squaredNorm() + q[1].squaredNorm() + q[2].squaredNorm());
  return s * g.voxel * g.voxel * g.voxel;
}

double data_misfit(const TensorSinogram& d, const std::vector<Mat3>& JF, double& dnorm2) {
  double s = 0.0;
  dnorm2 = 0.0;
  for (std::size_t r = 0; r < d.size(); ++r)
    if (d.mask[r]) {
      s += (JF[r] - d.data[r]).squaredNorm();
      dnorm2 += d.data[r].squaredNorm();
    }
  return s;
}

}  // namespace

double box_beta(double beta, const Grid& grid) {
  const double half = 0.5 * grid.voxel * double(*std::max_element(grid.n.begin(), grid.n.end()));
  return beta * half * half;
}

double tv_objective(const TensorSinogram& d, const RayOperator& op, const std::vector<Mat3>& F, double beta) {
  std::vector<Mat3> JF;
  op.forward(F, JF);
  double dn2;
  const double a = op.geometry().scan.pitch * op.geometry().scan.pitch;
  return 0.5 * a * data_misfit(d, JF, dn2) + beta * tv_value(op.grid(), F);
}

ReconResult reconstruct_tv(const TensorSinogram& d, const RayOperator& op, const ReconConfig& cfg,
                           const std::vector<std::uint8_t>& support) {
  const Grid& g = op.grid();
  const AcquisitionGeometry& geom = op.geometry();
  if (!d.conforms(geom)) throw ShapeMismatchError("sinogram does not match the acquisition geometry");
  if (!support.empty() && support.size() != g.size()) throw ShapeMismatchError("support mask does not match the grid");
  if (!(cfg.beta >= 0.0)) throw PreconditionError("beta must be non-negative");
  const std::size_t V = g.size(), R = geom.rays();
  // Iterations run in voxel units (lengths divided by h) so the step sizes do not depend on the
  // physical scale; the objective is divided by h^4 and the TV ball becomes beta / h^2.
  const double h = g.voxel;
  const double a = geom.scan.pitch * geom.scan.pitch / (h * h);
  Grid gu = g;
  gu.voxel = 1.0;
  auto pin = [&](std::vector<Mat3>& x) {
    if (support.empty()) return;
    for (std::size_t v = 0; v < V; ++v)
      if (!support[v]) x[v].setZero();
  };

  // Power iteration for |J^T J| restricted to the free voxels.
  std::vector<Mat3> x(V), tmp(V), Jx(R);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (auto& m : x)
    for (int e = 0; e < 9; ++e) m(e / 3, e % 3) = uni(rng);
  pin(x);
  double lambda_J = 0.0;
  for (int it = 0; it < 30; ++it) {
    const double n = norm(x);
    if (!(n > 0.0)) break;
    for (auto& m : x) m /= n;
    op.forward(x, Jx);
    op.adjoint(Jx, std::vector<std::uint8_t>(R, 1), tmp);
    pin(tmp);
    lambda_J = std::sqrt(dot(tmp, tmp));
    x.swap(tmp);
  }
  lambda_J /= h * h;
  if (!(lambda_J > 0.0)) throw NumericalError("ray operator has zero norm on the support");
  const double lambda_D = 12.0;
  const double c = std::sqrt(lambda_D / (a * lambda_J));
  const double s = c * std::sqrt(a);

  // Joint operator norm of K = [s J; D].
  std::vector<std::array<Mat3, 3>> gx;
  std::vector<Mat3> divx;
  double L2 = 0.0;
  for (auto& m : x)
    for (int e = 0; e < 9; ++e) m(e / 3, e % 3) = uni(rng);
  pin(x);
  for (int it = 0; it < 30; ++it) {
    const double n = norm(x);
    for (auto& m : x) m /= n;
    op.forward(x, Jx);
    op.adjoint(Jx, std::vector<std::uint8_t>(R, 1), tmp);
    tensor_gradient(gu, x, gx);
    tensor_divergence(gu, gx, divx);
    for (std::size_t v = 0; v < V; ++v) tmp[v] = (s * s / (h * h)) * tmp[v] - divx[v];
    pin(tmp);
    L2 = std::sqrt(dot(tmp, tmp));
    x.swap(tmp);
  }
  const double L = std::sqrt(L2) * 1.02;
  const double tau = 0.99 / L, sigma = 0.99 / L;

  ReconResult res;
  res.operator_norm = L;
  std::vector<Mat3> X(V, Mat3::Zero()), Xbar(V, Mat3::Zero()), Xold(V), y1(R, Mat3::Zero()), JtY(V), KtY(V);
  std::vector<std::array<Mat3, 3>> y2(V, {Mat3::Zero(), Mat3::Zero(), Mat3::Zero()}), gradX;
  const double ball = cfg.beta / (h * h);
  const double sh = s / h;
  double dn2 = 0.0;
  for (std::size_t r = 0; r < R; ++r)
    if (d.mask[r]) dn2 += d.data[r].squaredNorm();

  for (int it = 1; it <= cfg.max_iters; ++it) {
    op.forward(Xbar, Jx);
    for (std::size_t r = 0; r < R; ++r)
      y1[r] = d.mask[r] ? ((y1[r] + sigma * sh * (Jx[r] - d.data[r])) / (1.0 + sigma * c * c)).eval() : Mat3::Zero().eval();
    tensor_gradient(gu, Xbar, gradX);
    for (std::size_t v = 0; v < V; ++v) {
      auto& q = y2[v];
      for (int k = 0; k < 3; ++k) q[k] += sigma * gradX[v][k];
      const double nq = std::sqrt(q[0].squaredNorm() + q[1].squaredNorm() + q[2].squaredNorm());
      if (nq > ball) {
        const double f = ball > 0.0 ? ball / nq : 0.0;
        for (int k = 0; k < 3; ++k) q[k] *= f;
      }
    }
    op.adjoint(y1, d.mask, JtY);
    tensor_divergence(gu, y2, divx);
    Xold = X;
    for (std::size_t v = 0; v < V; ++v) X[v] -= tau * (sh * JtY[v] - divx[v]);
    pin(X);
    double dx2 = 0.0, x2 = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      dx2 += (X[v] - Xold[v]).squaredNorm();
      x2 += X[v].squaredNorm();
      Xbar[v] = 2.0 * X[v] - Xold[v];
    }
    const double change = x2 > 0.0 ? std::sqrt(dx2 / x2) : std::sqrt(dx2);
    res.iterations = it;
    const bool done = change <= cfg.tolerance;
    if (cfg.log_every > 0 && (it % cfg.log_every == 0 || done || it == cfg.max_iters)) {
      op.forward(X, Jx);
      double tmp2;
      const double mis = data_misfit(d, Jx, tmp2);
      res.history.push_back({it, 0.5 * geom.scan.pitch * geom.scan.pitch * mis + cfg.beta * tv_value(g, X), dn2 > 0 ? std::sqrt(mis / dn2) : std::sqrt(mis),
                             change});
    }
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.F = TensorVolume(g, Mat3::Zero());
  res.F.data = X;
  return res;
}

ReconResult reconstruct_tv(const TensorSinogram& d, const AcquisitionGeometry& geom, const Grid& grid,
                           const ReconConfig& cfg, const std::vector<std::uint8_t>& support) {
  const RayOperator op(grid, geom, cfg.workers);
  return reconstruct_tv(d, op, cfg, support);
}

TensorVolume extract_strain(const TensorVolume& F, StrainConvention convention) {
  TensorVolume out(F.grid, Mat3::Zero());
  for (std::size_t v = 0; v < F.size(); ++v) {
    if (convention == StrainConvention::Arithmetic) {
      out.data[v] = sym(F.data[v]);
      continue;
    }
    const Mat3 A = Mat3::Identity() + F.data[v];
    if (!(A.determinant() > 1e-8)) throw NumericalError("id + F is not invertible with positive determinant");
    Eigen::SelfAdjointEigenSolver<Mat3> es(A.transpose() * A);
    const Vec3 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    out.data[v] = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose() - Mat3::Identity();
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

ErrorReport error_report(const TensorVolume& recon, const TensorVolume& truth, const std::vector<std::uint8_t>& region) {
  if (!(recon.grid == truth.grid)) throw ShapeMismatchError("volumes have different grids");
  const Grid& g = recon.grid;
  ErrorReport rep;
  const std::size_t V = g.size();
  rep.abs_error.resize(V);
  rep.abs_sym_error.resize(V);
  for (std::size_t v = 0; v < V; ++v) {
    const Mat3 diff = recon.data[v] - truth.data[v];
    rep.abs_error[v] = diff.cwiseAbs();
    rep.abs_sym_error[v] = sym(diff).cwiseAbs();
  }
  auto in_region = [&](std::size_t v) { return region.empty() || region[v]; };
  for (int c = 0; c < 9; ++c) {
    std::vector<double> vals;
    for (std::size_t v = 0; v < V; ++v)
      if (in_region(v)) vals.push_back(rep.abs_error[v](c / 3, c % 3));
    rep.full[std::size_t(c)] = {percentile(vals, 50), percentile(vals, 99), percentile(vals, 100)};
  }
  constexpr int sym_idx[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
  for (int c = 0; c < 6; ++c) {
    std::vector<double> vals;
    for (std::size_t v = 0; v < V; ++v)
      if (in_region(v)) vals.push_back(rep.abs_sym_error[v](sym_idx[c][0], sym_idx[c][1]));
    rep.sym[std::size_t(c)] = {percentile(vals, 50), percentile(vals, 99), percentile(vals, 100)};
  }
  rep.profile_z.assign(std::size_t(g.n[2]), 0.0);
  rep.projection_xz.assign(std::size_t(g.n[0]) * std::size_t(g.n[2]), 0.0);
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        const double m = rep.abs_error[g.index(i, j, k)].maxCoeff();
        rep.profile_z[std::size_t(k)] += m / (double(g.n[0]) * g.n[1]);
        rep.projection_xz[std::size_t(i) * std::size_t(g.n[2]) + std::size_t(k)] += m / double(g.n[1]);
      }
  return rep;
}

}  // namespace sedtomo
