#pragma once

// K-Means machinery and the cluster-map bookkeeping shared by the offline
// base clustering and the adaptive cluster analysis.

#include "crom/rng.hpp"
#include "crom/spectral.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace crom {

/// One feature vector per voxel, stored row-major.
struct FeatureDataset {
  int dim = 0;
  std::vector<double> values;
  std::vector<int> voxel_ids;

  FeatureDataset() = default;
  FeatureDataset(int dim, std::vector<double> values, std::vector<int> voxel_ids);

  int rows() const { return static_cast<int>(voxel_ids.size()); }
  std::span<const double> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }

  /// Rows whose voxel ids appear in `voxels`, in that order.
  FeatureDataset subset(std::span<const int> voxels) const;
};

/// Seeded K-Means++ D^2 seeding; returns k centroids row-major.
std::vector<double> kmeans_seed_plusplus(const FeatureDataset& data, int k, Rng& rng);
std::vector<double> kmeans_seed_plusplus(const FeatureDataset& data, int k, std::uint64_t seed);

struct KMeansOptions {
  int k = 1;
  int n_init = 10;
  std::uint64_t seed = 0;
  /// Mini-batch size; plain Lloyd iterations when empty.
  std::optional<int> mini_batch;
  int max_iter = 300;
  /// Convergence threshold on the maximum centroid displacement.
  double tol = 1e-8;
};

struct KMeansResult {
  std::vector<int> labels;
  std::vector<double> centroids;
  double inertia = 0.0;
  int iterations = 0;
  /// Inertia after every assignment step of the retained restart (Lloyd only).
  std::vector<double> inertia_trace;
};

/// Best-of-n_init K-Means by within-cluster sum of squares.
///
/// Lloyd mode alternates full assignment and centroid update; mini-batch
/// mode updates centroids from random batches with per-centroid learning
/// rates and finishes with one full assignment. Centroids left without
/// points are moved onto the point farthest from its own centroid.
KMeansResult kmeans_lloyd(const FeatureDataset& data, const KMeansOptions& options);

/// Within-cluster sum of squares of a labelling.
double kmeans_inertia(const FeatureDataset& data, std::span<const int> labels,
                      std::span<const double> centroids);

/// Cluster record; inactive records are kept as the adaptivity hierarchy.
struct ClusterRecord {
  int id = -1;
  int phase = -1;
  std::vector<int> voxels;
  double volume_fraction = 0.0;
  int level = 0;
  int parent = -1;
  int birth_increment = 0;
  bool active = true;
  std::vector<int> children;
};

/// Voxel-to-cluster assignment plus the cluster hierarchy.
///
/// Cluster ids are never reused. Active clusters are ordered by id; that
/// order defines the row/column layout of interaction matrices and of the
/// reduced equilibrium system.
class ClusterMap {
 public:
  ClusterMap() = default;
  explicit ClusterMap(int voxel_count);

  int voxel_count() const { return static_cast<int>(labels_.size()); }
  const std::vector<int>& labels() const { return labels_; }
  int label(int voxel) const { return labels_[static_cast<std::size_t>(voxel)]; }

  int n_active() const { return static_cast<int>(active_.size()); }
  const std::vector<int>& active_ids() const { return active_; }
  /// Position of an active cluster in the active ordering.
  int index_of(int id) const;
  bool is_active(int id) const;
  bool contains(int id) const { return records_.count(id) != 0; }

  const ClusterRecord& record(int id) const;
  const ClusterRecord& active(int index) const { return record(active_[static_cast<std::size_t>(index)]); }
  const std::map<int, ClusterRecord>& records() const { return records_; }
  int next_id() const { return next_id_; }

  /// Add a base (level 0) cluster; returns its id.
  int add_cluster(int phase, std::vector<int> voxels);

  /// Replace an active cluster by children built from disjoint voxel groups
  /// that exactly cover it. Returns the new ids.
  std::vector<int> split(int parent_id, const std::vector<std::vector<int>>& groups,
                         int increment);

  /// Volume fractions of active clusters in active order.
  std::vector<double> volume_fractions() const;

  /// Check every structural invariant against the grid; throws on violation.
  void validate(const VoxelGrid& grid) const;

  /// Hash of the active partition (ids, phases and voxel sets).
  std::uint64_t hash() const;

 private:
  void rebuild_active();

  std::vector<int> labels_;
  std::map<int, ClusterRecord> records_;
  std::vector<int> active_;
  std::map<int, int> index_;
  int next_id_ = 0;
};

/// Per-phase K-Means base clustering.
///
/// Phases are processed in ascending label order; cluster ids are
/// contiguous per phase and, within a phase, ordered by first voxel.
ClusterMap base_clustering(const VoxelGrid& grid, const FeatureDataset& features,
                           const std::map<int, int>& clusters_per_phase, std::uint64_t seed,
                           int n_init = 10);

}  // namespace crom
