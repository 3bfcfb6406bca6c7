#pragma once

// Small-strain tensor algebra for the 2D plane-strain formulation.
//
// In-plane second-order tensors are stored in Mandel notation
// (a11, a22, sqrt(2) a12) so that double contraction of fourth-order
// tensors reduces to ordinary matrix products. Constitutive updates need
// the out-of-plane component as well and use the 4-vector
// (a11, a22, a33, sqrt(2) a12).

#include <Eigen/Dense>

#include <cmath>

namespace crom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

inline const double kSqrt2 = std::sqrt(2.0);

/// Number of independent in-plane strain components.
inline constexpr int kStrainSize = 3;

/// Mandel vector from tensor components.
inline Vec3 mandel(double a11, double a22, double a12) {
  return Vec3(a11, a22, kSqrt2 * a12);
}

/// Tensor shear component a12 of a Mandel vector.
inline double tensor_shear(const Vec3& v) { return v(2) / kSqrt2; }
inline double tensor_shear(const Vec4& v) { return v(3) / kSqrt2; }

/// Embed an in-plane Mandel vector into the plane-strain 4-vector (a33 = 0).
inline Vec4 embed_plane(const Vec3& v) { return Vec4(v(0), v(1), 0.0, v(2)); }

/// Extract the in-plane part of a 4-vector.
inline Vec3 in_plane(const Vec4& v) { return Vec3(v(0), v(1), v(3)); }

/// In-plane block of a 4x4 Mandel operator.
inline Mat3 in_plane(const Mat4& m) {
  static constexpr int idx[3] = {0, 1, 3};
  Mat3 out;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) out(a, b) = m(idx[a], idx[b]);
  return out;
}

/// Second-order identity as a 4-vector.
inline Vec4 identity4() { return Vec4(1.0, 1.0, 1.0, 0.0); }

/// Isotropic elasticity lambda I(x)I + 2 mu I_s on the 4-component basis.
inline Mat4 isotropic_elasticity4(double lambda, double mu) {
  const Vec4 i = identity4();
  return lambda * i * i.transpose() + 2.0 * mu * Mat4::Identity();
}

/// Plane-strain in-plane isotropic elasticity in Mandel form.
inline Mat3 isotropic_elasticity(double lambda, double mu) {
  Mat3 d = Mat3::Zero();
  d(0, 0) = d(1, 1) = lambda + 2.0 * mu;
  d(0, 1) = d(1, 0) = lambda;
  d(2, 2) = 2.0 * mu;
  return d;
}

/// Deviatoric part of a 4-vector.
inline Vec4 deviator(const Vec4& v) {
  const double mean = (v(0) + v(1) + v(2)) / 3.0;
  return v - mean * identity4();
}

/// von Mises equivalent of a deviatoric 4-vector: sqrt(3/2 s:s).
inline double von_mises(const Vec4& dev) { return std::sqrt(1.5 * dev.squaredNorm()); }

}  // namespace crom
