#pragma once

// Clustering adaptivity: condition gate, target selection by feature jumps
// across cluster boundaries, child-count rules, cluster budget, adaptive
// cluster analysis with state inheritance, solution rewinding and the
// online increment loop that ties them together.

#include "crom/cit.hpp"
#include "crom/clustering.hpp"
#include "crom/materials.hpp"
#include "crom/rng.hpp"
#include "crom/solver.hpp"
#include "crom/spectral.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace crom {

enum class AdaptivityFeature { acc_p, plastic_work, h_norm };

struct AdaptivityConfig {
  AdaptivityFeature feature = AdaptivityFeature::acc_p;
  /// gamma_ratio; a value of 1 disables target selection.
  double trigger_ratio = 0.1;
  double child_volume_fraction = 0.5;
  double split_factor = 1.0;
  /// Dynamic split factor amplitude; 0 selects the static rule.
  double split_amplitude = 0.0;
  double magnitude_exponent = 1.0;
  /// Magnitude scaling of the lower-valued cluster of a jump.
  double theta_low = 1.0;
  int frequency = 1;
  int max_consecutive_steps = 1;
  int cluster_budget = 1000000;
  double min_feature_value = 0.0;
  int max_level = 1000000;
  int max_level_gap = 1000000;
  int min_voxels_per_cluster = 1;
  int scan_frequency = 1;
  bool repeat_increment = true;
  /// Phases whose clustering may evolve; all other phases stay static.
  std::set<int> adaptive_phases;
  /// Mini-batch K-Means restarts per split.
  int kmeans_n_init = 10;

  bool rewind = false;
  /// Rewinds allowed per run; each happens right after an adaptivity step.
  int max_rewinds = 1;

  void validate() const;
  bool operator==(const AdaptivityConfig&) const = default;
};

struct TargetEntry {
  int cluster = -1;
  /// Largest normalized jump recorded for the cluster.
  double max_jump = 0.0;
  /// Split magnitude s (jump - gamma_ratio, theta-scaled on the lower side), maximized.
  double magnitude = 0.0;
};

/// Targets ordered by cluster id.
struct TargetSet {
  std::vector<TargetEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  const TargetEntry* find(int cluster) const;
};

/// Per-cluster value of the adaptivity feature, in active order.
std::vector<double> cluster_feature(std::span<const ClusterState> states, const ClusterMap& map,
                                    AdaptivityFeature feature,
                                    const FeatureDataset* strain_concentration = nullptr);

/// Piecewise-uniform voxel field from per-cluster values (active order).
std::vector<double> reconstruct_field(const ClusterMap& map, std::span<const double> values);

/// Voxel field of the adaptivity feature.
std::vector<double> reconstruct_voxel_feature(std::span<const ClusterState> states,
                                              const ClusterMap& map, AdaptivityFeature feature,
                                              const FeatureDataset* strain_concentration = nullptr);

/// Phases passing the adaptivity gate after a converged increment.
std::set<int> evaluate_adaptivity_conditions(int increment, int consecutive_steps,
                                             int n_clusters,
                                             const std::map<int, double>& phase_max_feature,
                                             const AdaptivityConfig& cfg);

/// Scan every grid line for feature jumps across cluster boundaries.
///
/// Pairs are visited with stride scan_frequency from one random offset per
/// axis, plus the first pair and the wrap-around pair of every line.
TargetSet select_targets(std::span<const double> field, const VoxelGrid& grid,
                         const ClusterMap& map, const std::set<int>& eligible_phases,
                         const AdaptivityConfig& cfg, Rng& rng);

/// Number of children of a target cluster with `voxels` voxels.
int child_count(const TargetEntry& target, const AdaptivityConfig& cfg, int voxels);

/// Accepted targets: descending magnitude (then jump, then id), greedily
/// until the projected cluster count reaches the budget.
std::vector<TargetEntry> enforce_budget(const TargetSet& targets,
                                        const std::map<int, int>& child_counts,
                                        const AdaptivityConfig& cfg, int n_clusters);

/// Split one active cluster with mini-batch K-Means on its voxel features.
/// Returns the child ids.
std::vector<int> split_cluster(ClusterMap& map, int parent, int n_child,
                               const FeatureDataset& features, std::uint64_t seed, int increment,
                               int n_init = 10);

/// States for the active clusters of `new_map`; clusters absent from
/// `old_map`'s active set take the state of their nearest ancestor that is.
std::vector<ClusterState> inherit_states(const ClusterMap& old_map, const ClusterMap& new_map,
                                         std::span<const ClusterState> states);

struct AdaptivityEvent {
  int increment = 0;
  int step = 0;
  std::vector<TargetEntry> targets;
  std::vector<int> child_counts;
  int clusters_before = 0;
  int clusters_after = 0;
  long cit_full = 0;
  long cit_symmetry = 0;
  double seconds_select = 0.0;
  double seconds_split = 0.0;
  double seconds_cit = 0.0;
  bool rewound = false;
};

struct AdaptivityOutcome {
  bool performed = false;
  ClusterMap map;
  InteractionMatrix cit;
  AdaptivityEvent event;
};

/// One adaptivity step: select targets, size and budget them, split, and
/// update the interaction matrix. The inputs are left untouched.
AdaptivityOutcome adaptivity_step(const VoxelGrid& grid, const ClusterMap& map,
                                  const InteractionMatrix& cit,
                                  std::span<const ClusterState> states,
                                  const FeatureDataset& features, const GreenOperator& green,
                                  const AdaptivityConfig& cfg, const std::set<int>& phases,
                                  int increment, std::uint64_t seed);

struct HistoryRecord {
  int increment = 0;
  Homogenized totals;
  int n_clusters = 0;
  ReferenceMaterial reference;
  bool fractured = false;
  int newton_iterations = 0;
  int sc_iterations = 0;
  bool sc_unconverged = false;
  int cuts = 0;
};

/// Everything needed to continue an online solve.
struct RunState {
  ClusterMap map;
  std::vector<ClusterState> states;
  InteractionMatrix cit;
  ReferenceMaterial reference;
  /// Completed increments.
  int increment = 0;
  /// Entry 0 is the unloaded state.
  std::vector<HistoryRecord> history;
  std::optional<int> fracture_increment;
};

struct RewindState {
  /// Increment that is re-solved first after a rewind.
  int increment = 0;
  RunState snapshot;
  std::uint64_t map_hash = 0;
};

/// Default store trigger: some cluster has yielded.
bool rewind_trigger(std::span<const ClusterState> states);

/// Deep snapshot of the state at the start of `increment`.
RewindState store_rewind_state(const RunState& start, int increment);

/// Snapshot state transferred onto a refined clustering by upward
/// hierarchy search. Throws InternalError when a cluster has no ancestor
/// that was active at snapshot time.
RunState perform_rewind(const RewindState& rewind, const ClusterMap& new_map,
                        const InteractionMatrix& new_cit);

struct OnlineProblem {
  const VoxelGrid* grid = nullptr;
  const MaterialTable* materials = nullptr;
  /// Voxel strain concentration features (offline data).
  const FeatureDataset* features = nullptr;
  LoadingPath loading;
  SolverConfig solver;
  FractureCriterion fracture;
  std::optional<AdaptivityConfig> adaptivity;
  std::uint64_t seed = 0;
};

struct OnlineResult {
  RunState state;
  std::vector<AdaptivityEvent> events;
  int rewinds = 0;
};

/// Called after every recorded increment; re-solved increments after a
/// rewind are reported again.
using OnlineObserver = std::function<void(const RunState&)>;

/// Online increment loop from a base clustering.
OnlineResult run_online(const OnlineProblem& problem, const ClusterMap& base,
                        const OnlineObserver& observer = {});

}  // namespace crom
