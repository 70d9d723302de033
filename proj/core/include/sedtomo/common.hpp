#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sedtomo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateLatticeError : Error { using Error::Error; };
struct ResourceLimitError : Error { using Error::Error; };
struct OutsideSphereError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct EmptyDiskError : Error { using Error::Error; };
struct NoDiskError : Error { using Error::Error; };
struct RankDeficientError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct NoSupportError : Error { using Error::Error; };
struct SingularityError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

/// [v]x, the matrix with [v]x w = v x w.
inline Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Axial vector of the skew part of m; inverse of cross_matrix on skew matrices.
inline Vec3 axial_vector(const Mat3& m) {
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

inline Mat3 sym(const Mat3& m) { return 0.5 * (m + m.transpose()); }

/// Orthogonal projection onto the plane normal to unit xi.
inline Mat3 transverse_projector(const Vec3& xi) {
  return Mat3::Identity() - xi * xi.transpose();
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

}  // namespace sedtomo
