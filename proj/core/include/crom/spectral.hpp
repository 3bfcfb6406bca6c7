#pragma once

// Periodic voxel grids, discrete Fourier transforms of tensor fields and the
// frequency-domain Green operator of an isotropic elastic reference material.

#include "crom/tensor.hpp"

#include <algorithm>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace crom {

/// Periodic regular grid of voxels carrying one material-phase label each.
///
/// Voxels are stored row-major in the multi-index (i1, i2[, i3]): the last
/// index varies fastest.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(std::vector<int> dims, std::vector<double> lengths, std::vector<int> phase_labels);

  int ndim() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<double>& lengths() const { return lengths_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(int voxel) const { return labels_[static_cast<std::size_t>(voxel)]; }
  int size() const { return static_cast<int>(labels_.size()); }

  /// Sorted list of distinct phase labels.
  std::vector<int> phases() const;
  /// Number of voxels carrying `phase`.
  int count(int phase) const;
  /// Volume of one voxel.
  double voxel_volume() const;
  /// Total RVE volume.
  double volume() const;

  int linear_index(std::span<const int> index) const;
  std::vector<int> multi_index(int linear) const;

  /// FNV-1a hash of dims, lengths and labels.
  std::uint64_t hash() const;

 private:
  std::vector<int> dims_;
  std::vector<double> lengths_;
  std::vector<int> labels_;
};

/// Physical coordinates ((l_i / n_i) s_i) of the sampling point `index`.
std::vector<double> sample_coordinates(const VoxelGrid& grid, std::span<const int> index);

/// Angular wave vector (2 pi / l_i) s_i of the frequency sample `index`.
///
/// With `folded`, indices above n_i / 2 map to their negative aliases
/// s_i - n_i; the Nyquist index n_i / 2 of an even axis stays positive.
std::vector<double> frequency_vector(const VoxelGrid& grid, std::span<const int> index,
                                     bool folded = true);

/// Signed wave vectors of every frequency sample, in grid layout.
class FrequencyGrid {
 public:
  FrequencyGrid() = default;
  explicit FrequencyGrid(const VoxelGrid& grid);

  int ndim() const { return ndim_; }
  int size() const { return static_cast<int>(waves_.size()) / std::max(ndim_, 1); }
  const std::vector<int>& dims() const { return dims_; }
  std::span<const double> wave(int sample) const {
    return {waves_.data() + static_cast<std::size_t>(sample) * static_cast<std::size_t>(ndim_),
            static_cast<std::size_t>(ndim_)};
  }
  /// True when the sample sits on the Nyquist index of axis `axis`.
  bool nyquist(int sample, int axis) const;

 private:
  int ndim_ = 0;
  std::vector<int> dims_;
  std::vector<double> waves_;
};

/// Isotropic elastic reference medium (lambda0, mu0).
struct ReferenceMaterial {
  double lambda = 0.0;
  double mu = 0.0;

  /// Validated construction: mu > 0 and lambda + 2 mu / n_dim > 0.
  static ReferenceMaterial make(double lambda, double mu, int ndim = 2);
  bool valid(int ndim = 2) const;

  /// In-plane Mandel elasticity tensor.
  Mat3 elasticity() const { return isotropic_elasticity(lambda, mu); }
  /// Coefficient of the fourth-order nnnn term of the Green operator.
  double coupling() const { return (lambda + mu) / (mu * (lambda + 2.0 * mu)); }

  bool operator==(const ReferenceMaterial&) const = default;
};

/// Unnormalized forward / 1/n_v-normalized inverse DFT on a fixed grid shape.
///
/// Plans are created once (FFTW_ESTIMATE, so they are deterministic) and
/// shared between copies. Execution is reentrant; buffers are caller-owned.
class FourierTransform {
 public:
  FourierTransform() = default;
  explicit FourierTransform(std::vector<int> dims);

  int size() const { return size_; }
  const std::vector<int>& dims() const { return dims_; }

  void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;
  /// Includes the 1/n_v normalization.
  void inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;

  /// Forward transform of a real field.
  std::vector<std::complex<double>> forward_real(std::span<const double> in) const;
  /// Real part of the inverse transform.
  std::vector<double> inverse_real(std::span<const std::complex<double>> in) const;

 private:
  struct Plans;
  std::vector<int> dims_;
  int size_ = 0;
  std::shared_ptr<const Plans> plans_;
};

/// Per-voxel tensor field with `components` scalar channels, component-major.
struct SpectralField {
  int components = 0;
  int samples = 0;
  std::vector<std::complex<double>> data;

  SpectralField() = default;
  SpectralField(int components, int samples)
      : components(components), samples(samples),
        data(static_cast<std::size_t>(components) * static_cast<std::size_t>(samples)) {}

  std::span<std::complex<double>> channel(int c) {
    return {data.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(samples),
            static_cast<std::size_t>(samples)};
  }
  std::span<const std::complex<double>> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(samples),
            static_cast<std::size_t>(samples)};
  }
};

enum class Direction { forward, inverse };

/// Component-wise multidimensional transform of a tensor field.
SpectralField spectral_transform(const SpectralField& field, const FourierTransform& fft,
                                 Direction direction);

/// Frequency-domain Green operator of an isotropic reference material.
///
/// Split into two moduli-independent parts so that a change of reference
/// material is a recombination rather than a reassembly:
///   Phi(zeta) = part1(zeta) / mu0 - coupling(lambda0, mu0) * part2(zeta)
/// with part1 = 1/4 (d_ki n_h n_j + d_hi n_k n_j + d_kj n_h n_i + d_hj n_k n_i)
/// and part2 = n_i n_j n_k n_h, n = zeta / |zeta|. Both vanish at zeta = 0.
/// At Nyquist samples of even axes the parts are averaged over the sign of
/// the Nyquist components, which keeps the spatial kernel real and even.
class GreenOperator {
 public:
  GreenOperator() = default;
  GreenOperator(const ReferenceMaterial& reference, const FrequencyGrid& frequencies);

  const ReferenceMaterial& reference() const { return reference_; }
  int size() const { return static_cast<int>(part1_.size()); }
  const std::vector<int>& dims() const { return dims_; }

  const Mat3& part1(int sample) const { return part1_[static_cast<std::size_t>(sample)]; }
  const Mat3& part2(int sample) const { return part2_[static_cast<std::size_t>(sample)]; }

  /// Combined operator for the assembly reference material.
  Mat3 component(int sample) const { return component(sample, reference_); }
  /// Combined operator for an arbitrary reference material.
  Mat3 component(int sample, const ReferenceMaterial& ref) const {
    return part1(sample) / ref.mu - ref.coupling() * part2(sample);
  }

  const FourierTransform& transform() const { return fft_; }

 private:
  ReferenceMaterial reference_;
  std::vector<int> dims_;
  std::vector<Mat3> part1_;
  std::vector<Mat3> part2_;
  FourierTransform fft_;
};

/// Green operator assembly at every frequency sample.
GreenOperator assemble_green_operator(const ReferenceMaterial& reference,
                                      const FrequencyGrid& frequencies);

/// Both Green parts for a single unit direction n (2D), in Mandel form.
void green_parts(double n1, double n2, Mat3& part1, Mat3& part2);

}  // namespace crom
