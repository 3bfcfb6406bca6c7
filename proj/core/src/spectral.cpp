#include "crom/spectral.hpp"

#include "crom/error.hpp"
#include "crom/hash.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

namespace crom {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void check_index(const VoxelGrid& grid, std::span<const int> index) {
  require(static_cast<int>(index.size()) == grid.ndim(),
          "multi-index rank does not match grid dimension");
  for (int d = 0; d < grid.ndim(); ++d) {
    require(index[d] >= 0 && index[d] < grid.dims()[d],
            "multi-index component " + std::to_string(index[d]) + " out of range on axis " +
                std::to_string(d));
  }
}

// Pair of tensor indices addressed by each Mandel slot.
constexpr int kPair[3][2] = {{0, 0}, {1, 1}, {0, 1}};

}  // namespace

// ---------------------------------------------------------------------------

VoxelGrid::VoxelGrid(std::vector<int> dims, std::vector<double> lengths,
                     std::vector<int> phase_labels)
    : dims_(std::move(dims)), lengths_(std::move(lengths)), labels_(std::move(phase_labels)) {
  require(!dims_.empty() && dims_.size() <= 3, "grid must have 1 to 3 dimensions");
  require(lengths_.size() == dims_.size(), "lengths must match dims");
  std::size_t n = 1;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    require(dims_[d] >= 2, "every grid dimension must be at least 2");
    require(lengths_[d] > 0.0, "every RVE length must be positive");
    n *= static_cast<std::size_t>(dims_[d]);
  }
  require(labels_.size() == n, "label count " + std::to_string(labels_.size()) +
                                   " does not match grid size " + std::to_string(n));
}

std::vector<int> VoxelGrid::phases() const {
  std::set<int> s(labels_.begin(), labels_.end());
  return {s.begin(), s.end()};
}

int VoxelGrid::count(int phase) const {
  return static_cast<int>(std::count(labels_.begin(), labels_.end(), phase));
}

double VoxelGrid::voxel_volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < dims_.size(); ++d) v *= lengths_[d] / dims_[d];
  return v;
}

double VoxelGrid::volume() const {
  return std::accumulate(lengths_.begin(), lengths_.end(), 1.0, std::multiplies<>());
}

int VoxelGrid::linear_index(std::span<const int> index) const {
  check_index(*this, index);
  int linear = 0;
  for (int d = 0; d < ndim(); ++d) linear = linear * dims_[d] + index[d];
  return linear;
}

std::vector<int> VoxelGrid::multi_index(int linear) const {
  require(linear >= 0 && linear < size(), "linear voxel index out of range");
  std::vector<int> index(dims_.size());
  for (int d = ndim() - 1; d >= 0; --d) {
    index[d] = linear % dims_[d];
    linear /= dims_[d];
  }
  return index;
}

std::uint64_t VoxelGrid::hash() const {
  Fnv1a h;
  h.add(dims_);
  h.add(lengths_);
  h.add(labels_);
  return h.value();
}

std::vector<double> sample_coordinates(const VoxelGrid& grid, std::span<const int> index) {
  check_index(grid, index);
  std::vector<double> y(index.size());
  for (int d = 0; d < grid.ndim(); ++d) y[d] = grid.lengths()[d] / grid.dims()[d] * index[d];
  return y;
}

std::vector<double> frequency_vector(const VoxelGrid& grid, std::span<const int> index,
                                     bool folded) {
  check_index(grid, index);
  std::vector<double> zeta(index.size());
  for (int d = 0; d < grid.ndim(); ++d) {
    int s = index[d];
    if (folded && 2 * s > grid.dims()[d]) s -= grid.dims()[d];
    zeta[d] = 2.0 * std::numbers::pi / grid.lengths()[d] * s;
  }
  return zeta;
}

// ---------------------------------------------------------------------------

FrequencyGrid::FrequencyGrid(const VoxelGrid& grid) : ndim_(grid.ndim()), dims_(grid.dims()) {
  waves_.resize(static_cast<std::size_t>(grid.size()) * static_cast<std::size_t>(ndim_));
  for (int k = 0; k < grid.size(); ++k) {
    const auto idx = grid.multi_index(k);
    const auto z = frequency_vector(grid, idx, true);
    std::copy(z.begin(), z.end(), waves_.begin() + static_cast<std::ptrdiff_t>(k) * ndim_);
  }
}

bool FrequencyGrid::nyquist(int sample, int axis) const {
  const int n = dims_[static_cast<std::size_t>(axis)];
  if (n % 2 != 0) return false;
  int stride = 1;
  for (int d = ndim_ - 1; d > axis; --d) stride *= dims_[static_cast<std::size_t>(d)];
  return (sample / stride) % n == n / 2;
}

// ---------------------------------------------------------------------------

ReferenceMaterial ReferenceMaterial::make(double lambda, double mu, int ndim) {
  ReferenceMaterial r{lambda, mu};
  require(r.valid(ndim), "degenerate reference material (lambda=" + std::to_string(lambda) +
                             ", mu=" + std::to_string(mu) + ")");
  return r;
}

bool ReferenceMaterial::valid(int ndim) const {
  return std::isfinite(lambda) && std::isfinite(mu) && mu > 0.0 &&
         lambda + 2.0 * mu / ndim > 0.0;
}

// ---------------------------------------------------------------------------

struct FourierTransform::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

FourierTransform::FourierTransform(std::vector<int> dims) : dims_(std::move(dims)) {
  require(!dims_.empty(), "transform needs at least one dimension");
  size_ = 1;
  for (int n : dims_) {
    require(n >= 1, "transform dimension must be positive");
    size_ *= n;
  }
  auto plans = std::make_shared<Plans>();
  std::lock_guard lock(planner_mutex());
  auto* a = fftw_alloc_complex(static_cast<std::size_t>(size_));
  auto* b = fftw_alloc_complex(static_cast<std::size_t>(size_));
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans->forward =
      fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), a, b, FFTW_FORWARD, flags);
  plans->backward =
      fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), a, b, FFTW_BACKWARD, flags);
  fftw_free(a);
  fftw_free(b);
  if (!plans->forward || !plans->backward) throw InternalError("FFTW planning failed");
  plans_ = std::move(plans);
}

void FourierTransform::forward(std::span<const std::complex<double>> in,
                               std::span<std::complex<double>> out) const {
  require(plans_ != nullptr, "transform not initialized");
  require(static_cast<int>(in.size()) == size_ && static_cast<int>(out.size()) == size_,
          "field size does not match transform size");
  if (in.data() == out.data()) {
    std::vector<std::complex<double>> tmp(in.begin(), in.end());
    forward(tmp, out);
    return;
  }
  fftw_execute_dft(plans_->forward,
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void FourierTransform::inverse(std::span<const std::complex<double>> in,
                               std::span<std::complex<double>> out) const {
  require(plans_ != nullptr, "transform not initialized");
  require(static_cast<int>(in.size()) == size_ && static_cast<int>(out.size()) == size_,
          "field size does not match transform size");
  if (in.data() == out.data()) {
    std::vector<std::complex<double>> tmp(in.begin(), in.end());
    inverse(tmp, out);
    return;
  }
  fftw_execute_dft(plans_->backward,
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / size_;
  for (auto& v : out) v *= scale;
}

std::vector<std::complex<double>> FourierTransform::forward_real(std::span<const double> in) const {
  std::vector<std::complex<double>> tmp(in.begin(), in.end());
  std::vector<std::complex<double>> out(tmp.size());
  forward(tmp, out);
  return out;
}

std::vector<double> FourierTransform::inverse_real(
    std::span<const std::complex<double>> in) const {
  std::vector<std::complex<double>> out(in.size());
  inverse(in, out);
  std::vector<double> re(out.size());
  std::transform(out.begin(), out.end(), re.begin(), [](auto c) { return c.real(); });
  return re;
}

SpectralField spectral_transform(const SpectralField& field, const FourierTransform& fft,
                                 Direction direction) {
  require(field.samples == fft.size(), "field layout does not match grid");
  require(static_cast<int>(field.data.size()) == field.components * field.samples,
          "field storage does not match its declared shape");
  SpectralField out(field.components, field.samples);
  for (int c = 0; c < field.components; ++c) {
    if (direction == Direction::forward)
      fft.forward(field.channel(c), out.channel(c));
    else
      fft.inverse(field.channel(c), out.channel(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

void green_parts(double n1, double n2, Mat3& part1, Mat3& part2) {
  const double n[2] = {n1, n2};
  auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int a = 0; a < 3; ++a) {
    const int k = kPair[a][0], h = kPair[a][1];
    const double wa = a == 2 ? kSqrt2 : 1.0;
    for (int b = 0; b < 3; ++b) {
      const int i = kPair[b][0], j = kPair[b][1];
      const double wb = b == 2 ? kSqrt2 : 1.0;
      const double p1 = 0.25 * (delta(k, i) * n[h] * n[j] + delta(h, i) * n[k] * n[j] +
                                delta(k, j) * n[h] * n[i] + delta(h, j) * n[k] * n[i]);
      const double p2 = n[i] * n[j] * n[k] * n[h];
      part1(a, b) = wa * wb * p1;
      part2(a, b) = wa * wb * p2;
    }
  }
}

GreenOperator::GreenOperator(const ReferenceMaterial& reference, const FrequencyGrid& frequencies)
    : reference_(reference), dims_(frequencies.dims()) {
  require(reference.valid(frequencies.ndim()), "degenerate reference material");
  require(frequencies.ndim() == 2, "Green operator is implemented for 2D plane strain only");
  const int n = frequencies.size();
  part1_.assign(static_cast<std::size_t>(n), Mat3::Zero());
  part2_.assign(static_cast<std::size_t>(n), Mat3::Zero());
  for (int k = 0; k < n; ++k) {
    const auto z = frequencies.wave(k);
    const double norm = std::hypot(z[0], z[1]);
    if (norm == 0.0) continue;
    const bool ny0 = frequencies.nyquist(k, 0), ny1 = frequencies.nyquist(k, 1);
    Mat3 p1 = Mat3::Zero(), p2 = Mat3::Zero();
    int count = 0;
    for (int s0 : {1, -1}) {
      if (s0 < 0 && !ny0) continue;
      for (int s1 : {1, -1}) {
        if (s1 < 0 && !ny1) continue;
        Mat3 a, b;
        green_parts(s0 * z[0] / norm, s1 * z[1] / norm, a, b);
        p1 += a;
        p2 += b;
        ++count;
      }
    }
    part1_[static_cast<std::size_t>(k)] = p1 / count;
    part2_[static_cast<std::size_t>(k)] = p2 / count;
  }
  fft_ = FourierTransform(dims_);
}

GreenOperator assemble_green_operator(const ReferenceMaterial& reference,
                                      const FrequencyGrid& frequencies) {
  return GreenOperator(reference, frequencies);
}

}  // namespace crom
