#pragma once

// Constitutive models: isotropic linear elasticity and von Mises
// plasticity with isotropic power-law hardening, plane strain.

#include "crom/tensor.hpp"

#include <map>

namespace crom {

enum class MaterialKind { elastic, von_mises };

/// sigma_y(p) = sigma_y0 + coefficient * p^exponent.
struct Hardening {
  double sigma_y0 = 0.0;
  double coefficient = 0.0;
  double exponent = 1.0;

  bool operator==(const Hardening&) const = default;
};

struct PhaseMaterial {
  MaterialKind kind = MaterialKind::elastic;
  double young = 1.0;
  double poisson = 0.0;
  Hardening hardening;

  static PhaseMaterial elastic(double young, double poisson);
  static PhaseMaterial von_mises(double young, double poisson, double sigma_y0,
                                 double coefficient, double exponent);

  /// Throws InvalidInput naming the offending field.
  void validate() const;

  double lame_lambda() const { return young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)); }
  double shear_modulus() const { return young / (2.0 * (1.0 + poisson)); }
  double bulk_modulus() const { return young / (3.0 * (1.0 - 2.0 * poisson)); }

  bool operator==(const PhaseMaterial&) const = default;
};

/// Phase label -> material.
using MaterialTable = std::map<int, PhaseMaterial>;

/// Floor applied to the accumulated plastic strain inside the hardening
/// slope so that exponents below one keep a finite slope.
inline constexpr double kHardeningSlopeFloor = 1e-12;

double hardening_stress(const PhaseMaterial& mat, double acc_p);
double hardening_slope(const PhaseMaterial& mat, double acc_p);

/// Material state of one cluster (or voxel).
struct ClusterState {
  /// Total in-plane strain (Mandel).
  Vec3 strain = Vec3::Zero();
  /// Strain increment of the last update.
  Vec3 delta_strain = Vec3::Zero();
  /// In-plane stress increment of the last update.
  Vec3 delta_stress = Vec3::Zero();
  /// Total stress including the out-of-plane component.
  Vec4 stress = Vec4::Zero();
  Vec4 plastic_strain = Vec4::Zero();
  double acc_p = 0.0;
  double plastic_work = 0.0;

  bool operator==(const ClusterState&) const = default;
};

struct StateUpdate {
  ClusterState state;
  /// In-plane consistent tangent (Mandel).
  Mat3 tangent;
  bool plastic = false;
  /// Scalar return-mapping iterations (0 for elastic steps).
  int iterations = 0;
};

/// Incremental update from a converged state under an in-plane strain increment.
///
/// von Mises uses an elastic predictor and radial return solved with a
/// bracketed Newton iteration; throws ConvergenceError after 50 iterations.
/// Plastic work is integrated with the midpoint rule. The tangent is left
/// unset when with_tangent is false.
StateUpdate state_update(const PhaseMaterial& mat, const ClusterState& state_n,
                         const Vec3& delta_strain, bool with_tangent = true);

/// In-plane elastic tangent of a material.
Mat3 elastic_tangent(const PhaseMaterial& mat);

}  // namespace crom
