#pragma once

// Cluster interaction tensors T^(I)(J): computation through cluster
// convolutions with the Green operator, cluster symmetry, incremental
// update after clustering adaptivity and binary persistence.

#include "crom/clustering.hpp"
#include "crom/spectral.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace crom {

/// Per-voxel convolution of a cluster indicator with both Green parts.
///
/// Each part is a symmetric 3x3 Mandel matrix per voxel; the six
/// independent entries are stored channel-major.
struct ClusterConvolution {
  int samples = 0;
  std::vector<double> part1;
  std::vector<double> part2;

  /// Combined convolution field at one voxel for a reference material.
  Mat3 at(int voxel, const ReferenceMaterial& ref) const;
  Mat3 part1_at(int voxel) const;
  Mat3 part2_at(int voxel) const;
};

/// Inverse transform of chi_J(zeta) Phi(zeta) for the indicator of `voxels`.
ClusterConvolution cluster_convolution(const GreenOperator& green, std::span<const int> voxels);

/// Average of a cluster convolution over the voxels of cluster I, for both parts.
void interaction_tensor(const ClusterConvolution& convolution_J, std::span<const int> voxels_I,
                        Mat3& part1, Mat3& part2);

/// Combined interaction tensor for a reference material.
Mat3 interaction_tensor(const ClusterConvolution& convolution_J, std::span<const int> voxels_I,
                        const ReferenceMaterial& ref);

/// T^(J)(I) = (f_I / f_J) T^(I)(J).
Mat3 symmetry_counterpart(const Mat3& T_IJ, double f_I, double f_J);

enum class Provenance : std::uint8_t { full = 0, symmetry = 1, retained = 2 };

/// Dense matrix of interaction tensors over the active clusters of a map.
///
/// Tensors are held as the two moduli-independent parts of the Green
/// operator, so the combined tensors for any reference material are
///   T(ref) = part1 / mu0 - coupling(ref) * part2.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;

  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<int>& cluster_ids() const { return ids_; }
  const std::vector<double>& fractions() const { return fractions_; }
  const ReferenceMaterial& reference() const { return reference_; }

  const Mat3& part1(int i, int j) const { return part1_[slot(i, j)]; }
  const Mat3& part2(int i, int j) const { return part2_[slot(i, j)]; }
  Provenance provenance(int i, int j) const { return provenance_[slot(i, j)]; }

  Mat3 tensor(int i, int j) const { return tensor(i, j, reference_); }
  Mat3 tensor(int i, int j, const ReferenceMaterial& ref) const {
    return part1(i, j) / ref.mu - ref.coupling() * part2(i, j);
  }
  /// All combined tensors, row-major n x n.
  std::vector<Mat3> tensors(const ReferenceMaterial& ref) const;

  /// Counters of the assembly or update that produced this matrix.
  long full_count() const { return full_count_; }
  long symmetry_count() const { return symmetry_count_; }
  long retained_count() const { return retained_count_; }

  /// Hash of the cluster map the matrix was built for.
  std::uint64_t map_hash() const { return map_hash_; }

  void save(const std::filesystem::path& path, std::uint64_t grid_hash) const;
  /// Throws InvalidInput when the file does not belong to the given grid and map.
  static InteractionMatrix load(const std::filesystem::path& path, std::uint64_t grid_hash,
                                std::uint64_t map_hash);

 private:
  friend InteractionMatrix assemble_matrix(const ClusterMap&, const GreenOperator&);
  friend InteractionMatrix incremental_update(const InteractionMatrix&, const ClusterMap&,
                                              const ClusterMap&, const GreenOperator&);

  std::size_t slot(int i, int j) const {
    return static_cast<std::size_t>(i) * ids_.size() + static_cast<std::size_t>(j);
  }
  void resize(const ClusterMap& map, const GreenOperator& green);

  std::vector<int> ids_;
  std::vector<double> fractions_;
  ReferenceMaterial reference_;
  std::vector<Mat3> part1_;
  std::vector<Mat3> part2_;
  std::vector<Provenance> provenance_;
  long full_count_ = 0;
  long symmetry_count_ = 0;
  long retained_count_ = 0;
  std::uint64_t map_hash_ = 0;
};

/// Lower triangle (with diagonal) computed fully, upper triangle by symmetry.
InteractionMatrix assemble_matrix(const ClusterMap& map, const GreenOperator& green);

/// Reuse entries between clusters present in both maps; compute columns of
/// new clusters fully and their rows against retained clusters by symmetry.
InteractionMatrix incremental_update(const InteractionMatrix& old, const ClusterMap& old_map,
                                     const ClusterMap& new_map, const GreenOperator& green);

/// Largest relative deviation from cluster symmetry over all pairs.
double symmetry_defect(const InteractionMatrix& m);

/// Largest relative difference between two matrices over the same clusters.
double matrix_difference(const InteractionMatrix& a, const InteractionMatrix& b);

struct CitBenchReport {
  int n_init = 0;
  int n_old = 0;
  int n_new = 0;
  long standard_full = 0;
  long standard_symmetry = 0;
  long proposed_full = 0;
  long proposed_symmetry = 0;
  double standard_seconds = 0.0;
  double proposed_seconds = 0.0;
  double max_difference = 0.0;
};

/// Standard reassembly versus incremental update on a synthetic clustering.
///
/// n_old = nint(alpha n_init) clusters are kept, the remaining ones are split
/// into n_new = nint((1 + beta) n_init) - n_old clusters. Timings are the
/// best of `repeats` runs.
CitBenchReport benchmark_cit_update(const VoxelGrid& grid, int n_init, double alpha, double beta,
                                    std::uint64_t seed, int repeats = 3);

/// Nearest integer, halves rounded away from zero.
inline int nint(double x) { return static_cast<int>(std::lround(x)); }

}  // namespace crom
