#include "sedtomo/deformation.hpp"

#include <cmath>
#include <string>

namespace sedtomo {

DeformationField DeformationField::identity(const Grid& grid) {
  DeformationField f;
  f.grid = grid;
  f.A.assign(grid.size(), Mat3::Identity());
  f.b.assign(grid.size(), Vec3::Zero());
  f.support.assign(grid.size(), 1);
  return f;
}

double phantom_norm_constant(int d) {
  // E|s| for s ~ U[-1,1], and Monte Carlo means (4e7 samples) of the spectral norm
  // of 2x2 and 3x3 matrices with i.i.d. U[-1,1] entries.
  switch (d) {
    case 1: return 0.5;
    case 2: return 1.042791;
    case 3: return 1.437378;
    default: throw PreconditionError("phantom rank d must be 1, 2 or 3");
  }
}

namespace {

double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (double(rng() >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

Mat3 sample_perturbation(int d, std::mt19937_64& rng) {
  Mat3 E = Mat3::Zero();
  if (d == 1) {
    E = uniform_pm1(rng) * Mat3::Identity();
  } else if (d == 2) {
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) E(r, c) = uniform_pm1(rng);
  } else if (d == 3) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) E(r, c) = uniform_pm1(rng);
  } else {
    throw PreconditionError("phantom rank d must be 1, 2 or 3");
  }
  return E / phantom_norm_constant(d);
}

std::vector<int> layer_starts(int nz, int L) {
  if (L < 1) throw PreconditionError("layer count must be at least 1");
  if (nz < L) throw PreconditionError("grid has fewer z-slices than layers");
  std::vector<int> s(std::size_t(L) + 1);
  for (int l = 0; l <= L; ++l) s[std::size_t(l)] = int((long(l) * nz) / L);
  return s;
}

DeformationField sample_layered_phantom(const PhantomSpec& spec, const Grid& grid) {
  if (!(spec.sigma >= 0.0)) throw PreconditionError("sigma must be non-negative");
  const std::vector<int> starts = layer_starts(grid.n[2], spec.L);
  std::mt19937_64 rng(spec.seed);
  std::vector<Mat3> layers;
  for (int l = 0; l < spec.L; ++l) layers.push_back(Mat3::Identity() + spec.sigma * sample_perturbation(spec.d, rng));

  // Shifts keep x -> A x + b continuous through each interface on the column axis,
  // with the middle layer unshifted.
  std::vector<Vec3> shifts(layers.size(), Vec3::Zero());
  if (spec.alignment == Alignment::Continuity) {
    const int mid = spec.L / 2;
    const double z0 = grid.origin.z() - 0.5 * grid.voxel;
    auto interface = [&](int l) { return Vec3(0.0, 0.0, z0 + grid.voxel * starts[std::size_t(l)]); };
    for (int l = mid + 1; l < spec.L; ++l)
      shifts[std::size_t(l)] = shifts[std::size_t(l - 1)] + (layers[std::size_t(l - 1)] - layers[std::size_t(l)]) * interface(l);
    for (int l = mid - 1; l >= 0; --l)
      shifts[std::size_t(l)] = shifts[std::size_t(l + 1)] + (layers[std::size_t(l + 1)] - layers[std::size_t(l)]) * interface(l + 1);
  }

  DeformationField f = DeformationField::identity(grid);
  for (int i = 0; i < grid.n[0]; ++i)
    for (int j = 0; j < grid.n[1]; ++j)
      for (int l = 0; l < spec.L; ++l)
        for (int k = starts[std::size_t(l)]; k < starts[std::size_t(l) + 1]; ++k) {
          const std::size_t idx = grid.index(i, j, k);
          f.A[idx] = layers[std::size_t(l)];
          f.b[idx] = shifts[std::size_t(l)];
        }
  return f;
}

void DislocationSpec::validate() const {
  if (!(nu >= 0.0 && nu < 0.5)) throw PreconditionError("Poisson ratio must lie in [0, 0.5)");
  if (line.cross(burgers).norm() <= 1e-12 * line.norm() * burgers.norm())
    throw PreconditionError("line and Burgers vectors must not be parallel");
  if (!(core_exclusion_radius >= 0.0)) throw PreconditionError("core exclusion radius must be non-negative");
}

Mat3 dislocation_basis(const DislocationSpec& spec) {
  const Vec3 u = spec.line.normalized();
  const Vec3 e1 = u.cross(spec.burgers).normalized();
  const Vec3 e2 = e1.cross(u).normalized();
  Mat3 B;
  B.col(0) = e1;
  B.col(1) = e2;
  B.col(2) = u;
  return B;
}

Cylindrical dislocation_coordinates(const DislocationSpec& spec, const Vec3& x) {
  const Vec3 c = dislocation_basis(spec).transpose() * (x - spec.core_point);
  return {std::hypot(c.x(), c.y()), std::atan2(c.y(), c.x()), c.z()};
}

Vec3 dislocation_displacement(const DislocationSpec& spec, const Vec3& x, double phi_ref) {
  const Cylindrical cyl = dislocation_coordinates(spec, x);
  if (cyl.r <= 0.0) throw SingularityError("dislocation displacement evaluated on the core line");
  double phi = cyl.phi;
  if (std::isfinite(phi_ref)) phi += kTwoPi * std::round((phi_ref - phi) / kTwoPi);
  const double nu = spec.nu;
  const double denom = 8.0 * kPi * (1.0 - nu);
  const double cb = (4.0 * (1.0 - nu) * phi + std::sin(2.0 * phi)) / denom;
  const double cub = (2.0 * (1.0 - 2.0 * nu) * std::log(cyl.r) + std::cos(2.0 * phi)) / denom;
  Vec3 R = cb * spec.burgers + cub * spec.line.normalized().cross(spec.burgers);
  if (spec.subtract_position) R -= x;
  return R;
}

Mat3 dislocation_gradient(const DislocationSpec& spec, const Vec3& x, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite-difference step must be positive");
  const double phi = dislocation_coordinates(spec, x).phi;
  Mat3 G;
  for (int k = 0; k < 3; ++k) {
    const Vec3 dx = h * Vec3::Unit(k);
    G.col(k) = (dislocation_displacement(spec, x + dx, phi) - dislocation_displacement(spec, x - dx, phi)) / (2.0 * h);
  }
  return G;
}

DeformationField dislocation_field(const DislocationSpec& spec, const Grid& grid, double h) {
  spec.validate();
  DeformationField f = DeformationField::identity(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Vec3 beta = grid.centre(j);
    const Cylindrical cyl = dislocation_coordinates(spec, beta);
    if (cyl.r <= std::max(spec.core_exclusion_radius, 2.0 * h)) {
      f.support[j] = 0;
      continue;
    }
    const Mat3 G = dislocation_gradient(spec, beta, h);
    f.A[j] = Mat3::Identity() + G;
    f.b[j] = dislocation_displacement(spec, beta) - G * beta;
  }
  return f;
}

Decomposition decompose(const std::vector<Mat3>& F) {
  Decomposition d;
  d.sym.resize(F.size());
  d.skew.resize(F.size());
  for (std::size_t j = 0; j < F.size(); ++j) {
    d.sym[j] = sym(F[j]);
    d.skew[j] = axial_vector(F[j]);
  }
  return d;
}

Decomposition decompose(const DeformationField& field) {
  std::vector<Mat3> F(field.A.size());
  for (std::size_t j = 0; j < F.size(); ++j) F[j] = field.A[j] - Mat3::Identity();
  return decompose(F);
}

Vec2 beam_average_truth(const DeformationField& field, int ix, int iy, const Vec3& p) {
  const Grid& g = field.grid;
  if (ix < 0 || iy < 0 || ix >= g.n[0] || iy >= g.n[1]) throw PreconditionError("beam column outside the grid");
  Vec2 acc = Vec2::Zero();
  int count = 0;
  for (int k = 0; k < g.n[2]; ++k) {
    const std::size_t j = g.index(ix, iy, k);
    if (!field.support[j]) continue;
    acc += in_plane(field.A[j].transpose() * p);
    ++count;
  }
  if (count == 0) throw NoSupportError("beam column has no supported voxels");
  return acc / double(count);
}

Mat3 dislocation_mean_deformation(const DislocationSpec& spec, const Vec2& centre, double footprint,
                                  double z0, double thickness, double h, int nxy, int nz) {
  Mat3 acc = Mat3::Zero();
  for (int a = 0; a < nxy; ++a)
    for (int b = 0; b < nxy; ++b)
      for (int c = 0; c < nz; ++c) {
        const Vec3 x(centre.x() + footprint * ((a + 0.5) / nxy - 0.5),
                     centre.y() + footprint * ((b + 0.5) / nxy - 0.5), z0 + thickness * (c + 0.5) / nz);
        acc += dislocation_gradient(spec, x, h);
      }
  return Mat3::Identity() + acc / double(nxy * nxy * nz);
}

}  // namespace sedtomo
