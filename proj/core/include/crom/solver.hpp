#pragma once

// Online stage of the cluster-reduced Lippmann-Schwinger problem: Newton
// solution of one macroscale increment, the regression-based
// self-consistent reference update, homogenization, fracture and toughness.

#include "crom/cit.hpp"
#include "crom/clustering.hpp"
#include "crom/materials.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crom {

enum class Control { strain, stress };

/// Macroscale constraints of one increment; one control flag per Mandel component.
struct MacroIncrement {
  std::array<Control, 3> control{Control::strain, Control::strain, Control::strain};
  /// Prescribed increment of the controlled quantity per component.
  Vec3 value = Vec3::Zero();

  MacroIncrement scaled(double factor) const { return {control, value * factor}; }
};

struct LoadingPath {
  std::vector<MacroIncrement> increments;

  /// `count` equal increments reaching `total` at the end.
  static LoadingPath proportional(const std::array<Control, 3>& control, const Vec3& total,
                                  int count);
  void validate() const;
};

enum class ReferenceRule { voigt, fixed };

struct SolverConfig {
  double newton_tol = 1e-6;
  int newton_max_iter = 12;
  double sc_tol = 1e-4;
  int sc_max_iter = 20;
  bool self_consistent = true;
  ReferenceRule initial_reference = ReferenceRule::voigt;
  /// Used with ReferenceRule::fixed.
  ReferenceMaterial fixed_reference;
  /// Maximum number of increment halvings after a Newton failure.
  int max_cuts = 4;

  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

struct FractureCriterion {
  int phase = 0;
  double volume_fraction_threshold = 0.005;
  double acc_p_threshold = 0.25;

  void validate() const;
  bool operator==(const FractureCriterion&) const = default;
};

/// Voigt average of the phase moduli, projected onto isotropic (lambda, mu).
ReferenceMaterial voigt_reference(const VoxelGrid& grid, const MaterialTable& materials);

/// Initial reference material per the configured rule.
ReferenceMaterial initial_reference(const SolverConfig& cfg, const VoxelGrid& grid,
                                    const MaterialTable& materials);

/// Stacked residual of the reduced equilibrium system.
///
/// Rows 3I..3I+2 hold R^(I) = de^(I) + sum_J T^(I)(J) (ds^(J) - D0 de^(J)) - de0;
/// the last three rows hold the macroscale constraints, strain or stress
/// per component.
Eigen::VectorXd assemble_residual(std::span<const Vec3> delta_strain,
                                  std::span<const Vec3> delta_stress, const Vec3& far_field,
                                  std::span<const Mat3> interaction,
                                  std::span<const double> fractions, const ReferenceMaterial& ref,
                                  const MacroIncrement& load);

/// Jacobian of assemble_residual with respect to (de^(1..n), de0).
Eigen::MatrixXd assemble_jacobian(std::span<const Mat3> tangents,
                                  std::span<const Mat3> interaction,
                                  std::span<const double> fractions, const ReferenceMaterial& ref,
                                  const MacroIncrement& load);

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::vector<ClusterState> states;
  Vec3 far_field = Vec3::Zero();
  std::string failure;
};

/// Newton-Raphson solution of one increment for a fixed reference material.
///
/// `interaction` holds the n x n combined tensors for `ref`, row-major.
/// The initial guess defaults to the previous increment of every cluster.
/// At least one linear solve is always performed, so linear problems report
/// one iteration. Failures are reported, not thrown.
NewtonResult newton_solve_increment(const ClusterMap& map, const MaterialTable& materials,
                                    std::span<const Mat3> interaction,
                                    const ReferenceMaterial& ref,
                                    std::span<const ClusterState> states_n,
                                    const MacroIncrement& load, const SolverConfig& cfg,
                                    std::span<const Vec3> guess = {});

enum class FitStatus { ok, volumetric_free, singular, invalid_moduli, zero_strain };

struct FitResult {
  ReferenceMaterial reference;
  FitStatus status = FitStatus::ok;
};

/// Least-squares isotropic moduli mapping a macroscale strain increment to
/// a stress increment. Degenerate cases keep the previous moduli (entirely
/// or for lambda only) and report it through the status.
FitResult self_consistent_fit(const Vec3& delta_eps, const Vec3& delta_sigma,
                              const ReferenceMaterial& previous);

struct IncrementResult {
  std::vector<ClusterState> states;
  Vec3 far_field = Vec3::Zero();
  /// Reference material of the final Newton solve.
  ReferenceMaterial reference;
  int newton_iterations = 0;
  int sc_iterations = 0;
  /// Self-consistent loop stopped at sc_max_iter without meeting sc_tol.
  bool sc_unconverged = false;
  /// Some fit of the loop was degenerate.
  bool sc_degenerate = false;
  int cuts = 0;
};

/// Alternate Newton solves and reference fits until the relative change of
/// (lambda0, mu0) drops below sc_tol. Throws ConvergenceError on Newton failure.
IncrementResult run_self_consistent_increment(const ClusterMap& map,
                                              const MaterialTable& materials,
                                              const InteractionMatrix& cit,
                                              const ReferenceMaterial& ref,
                                              std::span<const ClusterState> states_n,
                                              const MacroIncrement& load, const SolverConfig& cfg,
                                              double guess_scale = 1.0);

/// As run_self_consistent_increment, halving the increment on failure up
/// to cfg.max_cuts times.
IncrementResult solve_increment(const ClusterMap& map, const MaterialTable& materials,
                                const InteractionMatrix& cit, const ReferenceMaterial& ref,
                                std::span<const ClusterState> states_n,
                                const MacroIncrement& load, const SolverConfig& cfg);

struct Homogenized {
  Vec3 strain = Vec3::Zero();
  Vec3 stress = Vec3::Zero();
};

/// Volume-fraction weighted increments of cluster strain and stress.
Homogenized homogenize(std::span<const ClusterState> states, const ClusterMap& map);

/// Volume-fraction weighted totals of cluster strain and stress.
Homogenized homogenize_totals(std::span<const ClusterState> states, const ClusterMap& map);

bool check_fracture(std::span<const ClusterState> states, const ClusterMap& map,
                    const FractureCriterion& crit);

/// Trapezoidal area under (strain, stress) up to and including point
/// `last` (all points when empty).
double compute_toughness(std::span<const double> strain, std::span<const double> stress,
                         std::optional<int> last = std::nullopt);

}  // namespace crom
