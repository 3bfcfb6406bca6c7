#include "crom/cit.hpp"

#include "crom/error.hpp"
#include "crom/rng.hpp"

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace crom {

namespace {

// Independent entries of a symmetric 3x3 matrix.
constexpr int kSym[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};

Mat3 unpack(const std::vector<double>& field, int samples, int voxel) {
  Mat3 m;
  for (int e = 0; e < 6; ++e) {
    const double v = field[static_cast<std::size_t>(e) * static_cast<std::size_t>(samples) +
                           static_cast<std::size_t>(voxel)];
    m(kSym[e][0], kSym[e][1]) = v;
    m(kSym[e][1], kSym[e][0]) = v;
  }
  return m;
}

constexpr char kMagic[8] = {'C', 'R', 'O', 'M', 'C', 'I', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InvalidInput("truncated interaction matrix file");
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------

Mat3 ClusterConvolution::part1_at(int voxel) const { return unpack(part1, samples, voxel); }
Mat3 ClusterConvolution::part2_at(int voxel) const { return unpack(part2, samples, voxel); }

Mat3 ClusterConvolution::at(int voxel, const ReferenceMaterial& ref) const {
  return part1_at(voxel) / ref.mu - ref.coupling() * part2_at(voxel);
}

ClusterConvolution cluster_convolution(const GreenOperator& green, std::span<const int> voxels) {
  require(!voxels.empty(), "cannot convolve an empty cluster");
  const int n = green.size();
  std::vector<double> indicator(static_cast<std::size_t>(n), 0.0);
  for (int v : voxels) {
    require(v >= 0 && v < n, "cluster voxel outside the grid");
    indicator[static_cast<std::size_t>(v)] = 1.0;
  }
  const auto& fft = green.transform();
  const auto chi = fft.forward_real(indicator);

  ClusterConvolution out;
  out.samples = n;
  out.part1.resize(6 * static_cast<std::size_t>(n));
  out.part2.resize(6 * static_cast<std::size_t>(n));
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> field(static_cast<std::size_t>(n));
  const std::complex<double> i_unit(0.0, 1.0);
  for (int e = 0; e < 6; ++e) {
    const int a = kSym[e][0], b = kSym[e][1];
    // Both convolutions are real, so one complex transform carries the pair.
    for (int k = 0; k < n; ++k)
      spectrum[static_cast<std::size_t>(k)] =
          chi[static_cast<std::size_t>(k)] * (green.part1(k)(a, b) + i_unit * green.part2(k)(a, b));
    fft.inverse(spectrum, field);
    for (int v = 0; v < n; ++v) {
      const auto slot = static_cast<std::size_t>(e) * static_cast<std::size_t>(n) + static_cast<std::size_t>(v);
      out.part1[slot] = field[static_cast<std::size_t>(v)].real();
      out.part2[slot] = field[static_cast<std::size_t>(v)].imag();
    }
  }
  return out;
}

void interaction_tensor(const ClusterConvolution& convolution_J, std::span<const int> voxels_I,
                        Mat3& part1, Mat3& part2) {
  require(!voxels_I.empty(), "cluster I has zero volume fraction");
  double s1[6] = {}, s2[6] = {};
  const auto n = static_cast<std::size_t>(convolution_J.samples);
  for (int v : voxels_I) {
    require(v >= 0 && v < convolution_J.samples, "cluster voxel outside the grid");
    for (std::size_t e = 0; e < 6; ++e) {
      s1[e] += convolution_J.part1[e * n + static_cast<std::size_t>(v)];
      s2[e] += convolution_J.part2[e * n + static_cast<std::size_t>(v)];
    }
  }
  const double scale = 1.0 / static_cast<double>(voxels_I.size());
  for (int e = 0; e < 6; ++e) {
    const int a = kSym[e][0], b = kSym[e][1];
    part1(a, b) = part1(b, a) = s1[e] * scale;
    part2(a, b) = part2(b, a) = s2[e] * scale;
  }
}

Mat3 interaction_tensor(const ClusterConvolution& convolution_J, std::span<const int> voxels_I,
                        const ReferenceMaterial& ref) {
  Mat3 p1, p2;
  interaction_tensor(convolution_J, voxels_I, p1, p2);
  return p1 / ref.mu - ref.coupling() * p2;
}

Mat3 symmetry_counterpart(const Mat3& T_IJ, double f_I, double f_J) {
  return (f_I / f_J) * T_IJ;
}

// ---------------------------------------------------------------------------

std::vector<Mat3> InteractionMatrix::tensors(const ReferenceMaterial& ref) const {
  std::vector<Mat3> out(part1_.size());
  const double inv_mu = 1.0 / ref.mu, c = ref.coupling();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = part1_[k] * inv_mu - c * part2_[k];
  return out;
}

void InteractionMatrix::resize(const ClusterMap& map, const GreenOperator& green) {
  require(map.voxel_count() == green.size(), "cluster map and Green operator differ in size");
  ids_ = map.active_ids();
  fractions_ = map.volume_fractions();
  reference_ = green.reference();
  const std::size_t n2 = ids_.size() * ids_.size();
  part1_.assign(n2, Mat3::Zero());
  part2_.assign(n2, Mat3::Zero());
  provenance_.assign(n2, Provenance::full);
  full_count_ = symmetry_count_ = retained_count_ = 0;
  map_hash_ = map.hash();
}

InteractionMatrix assemble_matrix(const ClusterMap& map, const GreenOperator& green) {
  InteractionMatrix m;
  m.resize(map, green);
  const int n = m.size();
  for (int j = 0; j < n; ++j) {
    const auto conv = cluster_convolution(green, map.active(j).voxels);
    for (int i = j; i < n; ++i) {
      const auto ij = m.slot(i, j);
      interaction_tensor(conv, map.active(i).voxels, m.part1_[ij], m.part2_[ij]);
      m.provenance_[ij] = Provenance::full;
      ++m.full_count_;
      if (i == j) continue;
      const auto ji = m.slot(j, i);
      m.part1_[ji] = symmetry_counterpart(m.part1_[ij], m.fractions_[static_cast<std::size_t>(i)],
                                          m.fractions_[static_cast<std::size_t>(j)]);
      m.part2_[ji] = symmetry_counterpart(m.part2_[ij], m.fractions_[static_cast<std::size_t>(i)],
                                          m.fractions_[static_cast<std::size_t>(j)]);
      m.provenance_[ji] = Provenance::symmetry;
      ++m.symmetry_count_;
    }
  }
  return m;
}

InteractionMatrix incremental_update(const InteractionMatrix& old, const ClusterMap& old_map,
                                     const ClusterMap& new_map, const GreenOperator& green) {
  require(old.cluster_ids() == old_map.active_ids() && old.map_hash() == old_map.hash(),
          "interaction matrix does not belong to the previous cluster map");
  std::vector<char> is_new(static_cast<std::size_t>(new_map.n_active()), 0);
  int n_new = 0;
  for (int i = 0; i < new_map.n_active(); ++i) {
    const auto& rec = new_map.active(i);
    if (old_map.is_active(rec.id)) {
      if (old_map.record(rec.id).voxels != rec.voxels)
        throw InvalidInput("retained cluster " + std::to_string(rec.id) +
                           " changed its voxel set between clusterings");
    } else {
      is_new[static_cast<std::size_t>(i)] = 1;
      ++n_new;
    }
  }
  if (n_new == 0) return old;

  InteractionMatrix m;
  m.resize(new_map, green);
  const int n = m.size();
  std::vector<int> old_index(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i)
    if (!is_new[static_cast<std::size_t>(i)]) old_index[static_cast<std::size_t>(i)] = old_map.index_of(m.ids_[static_cast<std::size_t>(i)]);

  for (int i = 0; i < n; ++i) {
    if (is_new[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < n; ++j) {
      if (is_new[static_cast<std::size_t>(j)]) continue;
      const auto s = m.slot(i, j);
      const int oi = old_index[static_cast<std::size_t>(i)], oj = old_index[static_cast<std::size_t>(j)];
      m.part1_[s] = old.part1(oi, oj);
      m.part2_[s] = old.part2(oi, oj);
      m.provenance_[s] = Provenance::retained;
      ++m.retained_count_;
    }
  }

  for (int j = 0; j < n; ++j) {
    if (!is_new[static_cast<std::size_t>(j)]) continue;
    const auto conv = cluster_convolution(green, new_map.active(j).voxels);
    for (int i = 0; i < n; ++i) {
      // Among new clusters only the lower triangle is computed.
      if (is_new[static_cast<std::size_t>(i)] && i < j) continue;
      const auto ij = m.slot(i, j);
      interaction_tensor(conv, new_map.active(i).voxels, m.part1_[ij], m.part2_[ij]);
      m.provenance_[ij] = Provenance::full;
      ++m.full_count_;
      if (i == j) continue;
      const auto ji = m.slot(j, i);
      const double fi = m.fractions_[static_cast<std::size_t>(i)], fj = m.fractions_[static_cast<std::size_t>(j)];
      m.part1_[ji] = symmetry_counterpart(m.part1_[ij], fi, fj);
      m.part2_[ji] = symmetry_counterpart(m.part2_[ij], fi, fj);
      m.provenance_[ji] = Provenance::symmetry;
      ++m.symmetry_count_;
    }
  }
  return m;
}

double symmetry_defect(const InteractionMatrix& m) {
  double worst = 0.0;
  const auto& f = m.fractions();
  for (int i = 0; i < m.size(); ++i) {
    for (int j = i + 1; j < m.size(); ++j) {
      const Mat3 tij = m.tensor(i, j), tji = m.tensor(j, i);
      const Mat3 expected = symmetry_counterpart(tij, f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>(j)]);
      const double scale = std::max(expected.norm(), tji.norm());
      if (scale == 0.0) continue;
      worst = std::max(worst, (tji - expected).norm() / scale);
    }
  }
  return worst;
}

double matrix_difference(const InteractionMatrix& a, const InteractionMatrix& b) {
  require(a.cluster_ids() == b.cluster_ids(), "matrices cover different clusters");
  double scale = 0.0, diff = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      scale = std::max({scale, a.part1(i, j).norm(), a.part2(i, j).norm()});
      diff = std::max({diff, (a.part1(i, j) - b.part1(i, j)).norm(),
                       (a.part2(i, j) - b.part2(i, j)).norm()});
    }
  }
  return scale == 0.0 ? diff : diff / scale;
}

// ---------------------------------------------------------------------------

void InteractionMatrix::save(const std::filesystem::path& path, std::uint64_t grid_hash) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  put(out, kFormatVersion);
  put(out, grid_hash);
  put(out, map_hash_);
  put(out, static_cast<std::uint64_t>(ids_.size()));
  put(out, reference_.lambda);
  put(out, reference_.mu);
  for (int id : ids_) put(out, static_cast<std::int64_t>(id));
  for (double f : fractions_) put(out, f);
  for (std::size_t k = 0; k < part1_.size(); ++k) {
    out.write(reinterpret_cast<const char*>(part1_[k].data()), 9 * sizeof(double));
    out.write(reinterpret_cast<const char*>(part2_[k].data()), 9 * sizeof(double));
    put(out, static_cast<std::uint8_t>(provenance_[k]));
  }
  put(out, static_cast<std::int64_t>(full_count_));
  put(out, static_cast<std::int64_t>(symmetry_count_));
  put(out, static_cast<std::int64_t>(retained_count_));
  if (!out) throw InvalidInput("failed writing " + path.string());
}

InteractionMatrix InteractionMatrix::load(const std::filesystem::path& path,
                                          std::uint64_t grid_hash, std::uint64_t map_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw InvalidInput(path.string() + " is not an interaction matrix file");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion)
    throw InvalidInput("unsupported interaction matrix version " + std::to_string(version));
  if (get<std::uint64_t>(in) != grid_hash) throw InvalidInput("interaction matrix grid hash mismatch");
  InteractionMatrix m;
  m.map_hash_ = get<std::uint64_t>(in);
  if (m.map_hash_ != map_hash) throw InvalidInput("interaction matrix cluster map hash mismatch");
  const auto n = get<std::uint64_t>(in);
  m.reference_.lambda = get<double>(in);
  m.reference_.mu = get<double>(in);
  for (std::uint64_t i = 0; i < n; ++i) m.ids_.push_back(static_cast<int>(get<std::int64_t>(in)));
  for (std::uint64_t i = 0; i < n; ++i) m.fractions_.push_back(get<double>(in));
  m.part1_.resize(n * n);
  m.part2_.resize(n * n);
  m.provenance_.resize(n * n);
  for (std::size_t k = 0; k < n * n; ++k) {
    in.read(reinterpret_cast<char*>(m.part1_[k].data()), 9 * sizeof(double));
    in.read(reinterpret_cast<char*>(m.part2_[k].data()), 9 * sizeof(double));
    m.provenance_[k] = static_cast<Provenance>(get<std::uint8_t>(in));
  }
  m.full_count_ = get<std::int64_t>(in);
  m.symmetry_count_ = get<std::int64_t>(in);
  m.retained_count_ = get<std::int64_t>(in);
  return m;
}

// ---------------------------------------------------------------------------

CitBenchReport benchmark_cit_update(const VoxelGrid& grid, int n_init, double alpha, double beta,
                                    std::uint64_t seed, int repeats) {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(beta >= 1.0 - alpha - 1e-12, "beta must satisfy beta >= 1 - alpha");
  require(n_init >= 1 && n_init <= grid.size(), "n_init must lie in [1, voxel count]");
  require(repeats >= 1, "repeats must be positive");

  CitBenchReport rep;
  rep.n_init = n_init;
  rep.n_old = nint(alpha * n_init);
  rep.n_new = nint((1.0 + beta) * n_init) - rep.n_old;
  const int n_split = n_init - rep.n_old;
  require(rep.n_new >= 1, "benchmark needs at least one new cluster");
  require(n_split >= 1, "benchmark needs at least one cluster to split");
  require(rep.n_new >= n_split, "fewer new clusters than split parents");

  // Synthetic single-phase clustering: equal chunks of a shuffled voxel list.
  const VoxelGrid flat(grid.dims(), grid.lengths(), std::vector<int>(static_cast<std::size_t>(grid.size()), 0));
  std::vector<int> order(static_cast<std::size_t>(flat.size()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  ClusterMap old_map(flat.size());
  for (int c = 0; c < n_init; ++c) {
    const auto lo = static_cast<std::size_t>(c) * order.size() / static_cast<std::size_t>(n_init);
    const auto hi = static_cast<std::size_t>(c + 1) * order.size() / static_cast<std::size_t>(n_init);
    old_map.add_cluster(0, std::vector<int>(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                            order.begin() + static_cast<std::ptrdiff_t>(hi)));
  }

  ClusterMap new_map = old_map;
  for (int s = 0; s < n_split; ++s) {
    const int parent = old_map.active_ids()[static_cast<std::size_t>(rep.n_old + s)];
    const int children = rep.n_new / n_split + (s < rep.n_new % n_split ? 1 : 0);
    const auto& voxels = old_map.record(parent).voxels;
    require(children <= static_cast<int>(voxels.size()), "grid too small for the requested split");
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(children));
    for (std::size_t v = 0; v < voxels.size(); ++v)
      groups[v * static_cast<std::size_t>(children) / voxels.size()].push_back(voxels[v]);
    new_map.split(parent, groups, 1);
  }

  const GreenOperator green(ReferenceMaterial::make(1.0, 1.0), FrequencyGrid(flat));
  const InteractionMatrix old = assemble_matrix(old_map, green);

  rep.standard_seconds = rep.proposed_seconds = std::numeric_limits<double>::infinity();
  InteractionMatrix standard, proposed;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    standard = assemble_matrix(new_map, green);
    rep.standard_seconds = std::min(rep.standard_seconds, seconds_since(t0));
    t0 = std::chrono::steady_clock::now();
    proposed = incremental_update(old, old_map, new_map, green);
    rep.proposed_seconds = std::min(rep.proposed_seconds, seconds_since(t0));
  }
  rep.standard_full = standard.full_count();
  rep.standard_symmetry = standard.symmetry_count();
  rep.proposed_full = proposed.full_count();
  rep.proposed_symmetry = proposed.symmetry_count();
  rep.max_difference = matrix_difference(standard, proposed);
  if (!(rep.max_difference <= 1e-12))
    throw InternalError("incremental update deviates from reassembly by " +
                        std::to_string(rep.max_difference));
  return rep;
}

}  // namespace crom
