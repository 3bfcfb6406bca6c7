#pragma once

// Full-field spectral reference solver (basic fixed-point scheme on the
// discretized Lippmann-Schwinger equation) and the error metrics used to
// compare reduced and reference solutions.

#include "crom/clustering.hpp"
#include "crom/materials.hpp"
#include "crom/solver.hpp"
#include "crom/spectral.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace crom {

struct OracleConfig {
  /// Relative change of the strain-increment field that ends the fixed point.
  double tol = 1e-8;
  int max_iter = 100000;
  int max_cuts = 4;
  /// Reference material; Voigt average of the phases when empty.
  std::optional<ReferenceMaterial> reference;

  bool operator==(const OracleConfig&) const = default;
};

struct OracleIncrement {
  int iterations = 0;
  int cuts = 0;
};

struct FullFieldSolution {
  /// Per-voxel state after the last increment.
  std::vector<ClusterState> states;
  /// Homogenized totals after each increment; entry 0 is the unloaded state.
  std::vector<Homogenized> history;
  std::vector<OracleIncrement> increments;
  /// Per-voxel states at the requested checkpoint increments.
  std::map<int, std::vector<ClusterState>> checkpoints;
};

/// Called after every converged increment (1-based) with the voxel states.
using OracleObserver = std::function<void(int increment, std::span<const ClusterState> states)>;

/// Strain-driven full-field solve along a loading path.
FullFieldSolution solve_full_field(const VoxelGrid& grid, const MaterialTable& materials,
                                   const LoadingPath& loading, const OracleConfig& cfg = {},
                                   std::span<const int> checkpoints = {},
                                   const OracleObserver& observer = {});

/// Voxel strain increments for one macroscale strain increment from given
/// voxel states; exposed for cross-validation with the reduced solver.
std::vector<ClusterState> solve_full_field_increment(const VoxelGrid& grid,
                                                     const MaterialTable& materials,
                                                     const GreenOperator& green,
                                                     std::span<const ClusterState> states_n,
                                                     const Vec3& delta_macro,
                                                     const OracleConfig& cfg,
                                                     OracleIncrement* info = nullptr);

/// Elastic strain concentration tensors as clustering features: row v holds
/// the 3x3 Mandel matrix H(v) (row-major) mapping macroscale to local strain.
FeatureDataset strain_concentration_features(const VoxelGrid& grid,
                                             const MaterialTable& materials,
                                             const OracleConfig& cfg = {});

/// |reduced - reference| / |reference| in percent.
double relative_error(double reduced, double reference);

/// Root-mean-square of voxelwise differences.
double rmse_field(std::span<const double> reduced, std::span<const double> reference);

}  // namespace crom
