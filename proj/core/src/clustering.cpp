#include "crom/clustering.hpp"

#include "crom/error.hpp"
#include "crom/hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace crom {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::span<const double> centroid(std::span<const double> centroids, int dim, int c) {
  return centroids.subspan(static_cast<std::size_t>(c) * static_cast<std::size_t>(dim),
                           static_cast<std::size_t>(dim));
}

// Nearest centroid (lowest index on ties) and its squared distance.
std::pair<int, double> nearest(std::span<const double> x, std::span<const double> centroids,
                               int dim, int k) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    const double d = squared_distance(x, centroid(centroids, dim, c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

void assign(const FeatureDataset& data, std::span<const double> centroids, int k,
            std::vector<int>& labels) {
  labels.resize(static_cast<std::size_t>(data.rows()));
  for (int i = 0; i < data.rows(); ++i)
    labels[static_cast<std::size_t>(i)] = nearest(data.row(i), centroids, data.dim, k).first;
}

// Give every empty cluster the point farthest from its own centroid.
void repair_empty(const FeatureDataset& data, std::vector<double>& centroids, int k,
                  std::vector<int>& labels) {
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    int far = -1;
    double far_d = -1.0;
    for (int i = 0; i < data.rows(); ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(l)] < 2) continue;
      const double d = squared_distance(data.row(i), centroid(centroids, data.dim, l));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) throw InternalError("empty-cluster repair found no donor point");
    --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
    labels[static_cast<std::size_t>(far)] = c;
    counts[static_cast<std::size_t>(c)] = 1;
    const auto x = data.row(far);
    std::copy(x.begin(), x.end(),
              centroids.begin() + static_cast<std::ptrdiff_t>(c) * data.dim);
  }
}

std::vector<double> means(const FeatureDataset& data, const std::vector<int>& labels, int k,
                          const std::vector<double>& previous) {
  std::vector<double> sums(static_cast<std::size_t>(k) * static_cast<std::size_t>(data.dim), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < data.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    ++counts[static_cast<std::size_t>(l)];
    const auto x = data.row(i);
    for (int d = 0; d < data.dim; ++d)
      sums[static_cast<std::size_t>(l) * static_cast<std::size_t>(data.dim) + static_cast<std::size_t>(d)] += x[static_cast<std::size_t>(d)];
  }
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < data.dim; ++d) {
      auto& s = sums[static_cast<std::size_t>(c) * static_cast<std::size_t>(data.dim) + static_cast<std::size_t>(d)];
      if (counts[static_cast<std::size_t>(c)] > 0)
        s /= counts[static_cast<std::size_t>(c)];
      else
        s = previous[static_cast<std::size_t>(c) * static_cast<std::size_t>(data.dim) + static_cast<std::size_t>(d)];
    }
  }
  return sums;
}

double max_shift(const std::vector<double>& a, const std::vector<double>& b, int dim) {
  double m = 0.0;
  const std::size_t k = a.size() / static_cast<std::size_t>(dim);
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    for (std::size_t d = 0; d < static_cast<std::size_t>(dim); ++d) {
      const double diff = a[c * static_cast<std::size_t>(dim) + d] - b[c * static_cast<std::size_t>(dim) + d];
      s += diff * diff;
    }
    m = std::max(m, std::sqrt(s));
  }
  return m;
}

KMeansResult lloyd_run(const FeatureDataset& data, int k, int max_iter, double tol, Rng& rng) {
  KMeansResult r;
  r.centroids = kmeans_seed_plusplus(data, k, rng);
  for (int it = 0; it < max_iter; ++it) {
    assign(data, r.centroids, k, r.labels);
    repair_empty(data, r.centroids, k, r.labels);
    r.inertia_trace.push_back(kmeans_inertia(data, r.labels, r.centroids));
    auto updated = means(data, r.labels, k, r.centroids);
    const double shift = max_shift(updated, r.centroids, data.dim);
    r.centroids = std::move(updated);
    r.iterations = it + 1;
    if (shift < tol) break;
  }
  assign(data, r.centroids, k, r.labels);
  repair_empty(data, r.centroids, k, r.labels);
  r.inertia = kmeans_inertia(data, r.labels, r.centroids);
  return r;
}

KMeansResult mini_batch_run(const FeatureDataset& data, int k, int batch, int max_iter,
                            double tol, Rng& rng) {
  KMeansResult r;
  r.centroids = kmeans_seed_plusplus(data, k, rng);
  const int n = data.rows();
  std::vector<long> counts(static_cast<std::size_t>(k), 0);
  std::vector<int> picks(static_cast<std::size_t>(batch));
  for (int it = 0; it < max_iter; ++it) {
    const auto before = r.centroids;
    for (int b = 0; b < batch; ++b)
      picks[static_cast<std::size_t>(b)] =
          batch >= n ? b : static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    for (int i : picks) {
      const auto x = data.row(i);
      const int c = nearest(x, r.centroids, data.dim, k).first;
      const double eta = 1.0 / static_cast<double>(++counts[static_cast<std::size_t>(c)]);
      for (int d = 0; d < data.dim; ++d) {
        auto& v = r.centroids[static_cast<std::size_t>(c) * static_cast<std::size_t>(data.dim) + static_cast<std::size_t>(d)];
        v += eta * (x[static_cast<std::size_t>(d)] - v);
      }
    }
    r.iterations = it + 1;
    if (max_shift(r.centroids, before, data.dim) < tol) break;
  }
  assign(data, r.centroids, k, r.labels);
  repair_empty(data, r.centroids, k, r.labels);
  r.inertia = kmeans_inertia(data, r.labels, r.centroids);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureDataset::FeatureDataset(int dim, std::vector<double> values, std::vector<int> voxel_ids)
    : dim(dim), values(std::move(values)), voxel_ids(std::move(voxel_ids)) {
  require(dim > 0, "feature dimension must be positive");
  require(this->values.size() ==
              static_cast<std::size_t>(dim) * this->voxel_ids.size(),
          "feature rows must all have the declared length");
  std::set<int> seen(this->voxel_ids.begin(), this->voxel_ids.end());
  require(seen.size() == this->voxel_ids.size(), "feature voxel ids must be unique");
}

FeatureDataset FeatureDataset::subset(std::span<const int> voxels) const {
  int max_id = -1;
  for (int v : voxel_ids) max_id = std::max(max_id, v);
  std::vector<int> row_of(static_cast<std::size_t>(max_id + 1), -1);
  for (int i = 0; i < rows(); ++i) row_of[static_cast<std::size_t>(voxel_ids[static_cast<std::size_t>(i)])] = i;
  std::vector<double> vals;
  vals.reserve(voxels.size() * static_cast<std::size_t>(dim));
  for (int v : voxels) {
    require(v >= 0 && v <= max_id && row_of[static_cast<std::size_t>(v)] >= 0,
            "voxel " + std::to_string(v) + " has no feature row");
    const auto r = row(row_of[static_cast<std::size_t>(v)]);
    vals.insert(vals.end(), r.begin(), r.end());
  }
  return FeatureDataset(dim, std::move(vals), std::vector<int>(voxels.begin(), voxels.end()));
}

std::vector<double> kmeans_seed_plusplus(const FeatureDataset& data, int k, std::uint64_t seed) {
  Rng rng(seed);
  return kmeans_seed_plusplus(data, k, rng);
}

std::vector<double> kmeans_seed_plusplus(const FeatureDataset& data, int k, Rng& rng) {
  const int n = data.rows();
  require(k >= 1, "k must be at least 1");
  require(k <= n, "k = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
                      " available rows");
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(data.dim));
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

  auto take = [&](int i) {
    chosen[static_cast<std::size_t>(i)] = 1;
    const auto x = data.row(i);
    centroids.insert(centroids.end(), x.begin(), x.end());
    for (int j = 0; j < n; ++j)
      d2[static_cast<std::size_t>(j)] = std::min(d2[static_cast<std::size_t>(j)], squared_distance(data.row(j), x));
  };

  take(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int j = 0; j < n; ++j)
      if (!chosen[static_cast<std::size_t>(j)]) total += d2[static_cast<std::size_t>(j)];
    int pick = -1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        if (chosen[static_cast<std::size_t>(j)] || d2[static_cast<std::size_t>(j)] == 0.0) continue;
        acc += d2[static_cast<std::size_t>(j)];
        pick = j;
        if (acc > u) break;
      }
    } else {
      // Remaining rows coincide with chosen centroids: draw uniformly among them.
      std::vector<int> rest;
      for (int j = 0; j < n; ++j)
        if (!chosen[static_cast<std::size_t>(j)]) rest.push_back(j);
      pick = rest[static_cast<std::size_t>(rng.below(rest.size()))];
    }
    take(pick);
  }
  return centroids;
}

double kmeans_inertia(const FeatureDataset& data, std::span<const int> labels,
                      std::span<const double> centroids) {
  double s = 0.0;
  for (int i = 0; i < data.rows(); ++i)
    s += squared_distance(data.row(i), centroid(centroids, data.dim, labels[static_cast<std::size_t>(i)]));
  return s;
}

KMeansResult kmeans_lloyd(const FeatureDataset& data, const KMeansOptions& options) {
  require(options.k >= 1 && options.k <= data.rows(),
          "k = " + std::to_string(options.k) + " must lie in [1, " +
              std::to_string(data.rows()) + "]");
  require(options.n_init >= 1, "n_init must be at least 1");
  require(options.max_iter >= 1, "max_iter must be at least 1");
  if (options.mini_batch) require(*options.mini_batch >= 1, "mini-batch size must be positive");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int init = 0; init < options.n_init; ++init) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(init)));
    KMeansResult r =
        options.mini_batch
            ? mini_batch_run(data, options.k, std::min(*options.mini_batch, data.rows()),
                             options.max_iter, options.tol, rng)
            : lloyd_run(data, options.k, options.max_iter, options.tol, rng);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

// ---------------------------------------------------------------------------

ClusterMap::ClusterMap(int voxel_count) : labels_(static_cast<std::size_t>(voxel_count), -1) {
  require(voxel_count > 0, "cluster map needs at least one voxel");
}

int ClusterMap::index_of(int id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw InvalidInput("cluster " + std::to_string(id) + " is not active");
  return it->second;
}

bool ClusterMap::is_active(int id) const { return index_.count(id) != 0; }

const ClusterRecord& ClusterMap::record(int id) const {
  const auto it = records_.find(id);
  if (it == records_.end()) throw InvalidInput("unknown cluster " + std::to_string(id));
  return it->second;
}

int ClusterMap::add_cluster(int phase, std::vector<int> voxels) {
  require(!voxels.empty(), "cluster must contain at least one voxel");
  std::sort(voxels.begin(), voxels.end());
  ClusterRecord r;
  r.id = next_id_++;
  r.phase = phase;
  for (int v : voxels) {
    require(v >= 0 && v < voxel_count(), "cluster voxel out of range");
    require(labels_[static_cast<std::size_t>(v)] < 0, "voxel assigned to two clusters");
    labels_[static_cast<std::size_t>(v)] = r.id;
  }
  r.volume_fraction = static_cast<double>(voxels.size()) / voxel_count();
  r.voxels = std::move(voxels);
  records_.emplace(r.id, std::move(r));
  rebuild_active();
  return next_id_ - 1;
}

std::vector<int> ClusterMap::split(int parent_id, const std::vector<std::vector<int>>& groups,
                                   int increment) {
  require(is_active(parent_id), "cannot split inactive cluster " + std::to_string(parent_id));
  auto& parent = records_.at(parent_id);
  std::vector<int> covered;
  for (const auto& g : groups) {
    require(!g.empty(), "child cluster must contain at least one voxel");
    covered.insert(covered.end(), g.begin(), g.end());
  }
  std::sort(covered.begin(), covered.end());
  require(covered == parent.voxels, "child clusters must exactly cover their parent");

  std::vector<int> ids;
  for (const auto& g : groups) {
    ClusterRecord c;
    c.id = next_id_++;
    c.phase = parent.phase;
    c.voxels = g;
    std::sort(c.voxels.begin(), c.voxels.end());
    c.volume_fraction = static_cast<double>(c.voxels.size()) / voxel_count();
    c.level = parent.level + 1;
    c.parent = parent_id;
    c.birth_increment = increment;
    for (int v : c.voxels) labels_[static_cast<std::size_t>(v)] = c.id;
    ids.push_back(c.id);
    records_.emplace(c.id, std::move(c));
  }
  auto& p = records_.at(parent_id);
  p.active = false;
  p.children = ids;
  rebuild_active();
  return ids;
}

std::vector<double> ClusterMap::volume_fractions() const {
  std::vector<double> f;
  f.reserve(active_.size());
  for (int id : active_) f.push_back(records_.at(id).volume_fraction);
  return f;
}

void ClusterMap::rebuild_active() {
  active_.clear();
  index_.clear();
  for (const auto& [id, r] : records_) {
    if (!r.active) continue;
    index_[id] = static_cast<int>(active_.size());
    active_.push_back(id);
  }
}

void ClusterMap::validate(const VoxelGrid& grid) const {
  auto fail = [](const std::string& m) { throw InternalError("cluster map invariant: " + m); };
  if (grid.size() != voxel_count()) fail("voxel count differs from grid");
  std::vector<int> seen(static_cast<std::size_t>(voxel_count()), 0);
  double total = 0.0;
  for (int id : active_) {
    const auto& r = records_.at(id);
    if (r.voxels.empty()) fail("empty cluster " + std::to_string(id));
    for (int v : r.voxels) {
      if (labels_[static_cast<std::size_t>(v)] != id) fail("label mismatch at voxel " + std::to_string(v));
      if (grid.label(v) != r.phase) fail("cluster " + std::to_string(id) + " mixes phases");
      ++seen[static_cast<std::size_t>(v)];
    }
    if (r.volume_fraction != static_cast<double>(r.voxels.size()) / voxel_count())
      fail("volume fraction of cluster " + std::to_string(id));
    total += r.volume_fraction;
  }
  for (int s : seen)
    if (s != 1) fail("voxel not covered exactly once");
  if (std::abs(total - 1.0) > 1e-12) fail("volume fractions do not sum to one");
  for (const auto& [id, r] : records_) {
    if (r.parent < 0) {
      if (r.level != 0) fail("root cluster with nonzero level");
      continue;
    }
    const auto it = records_.find(r.parent);
    if (it == records_.end()) fail("dangling parent link");
    if (it->second.active) fail("parent still active");
    if (r.level != it->second.level + 1) fail("level is not parent level + 1");
    if (it->first >= id) fail("parent id not older than child");
  }
}

std::uint64_t ClusterMap::hash() const {
  Fnv1a h;
  for (int id : active_) {
    const auto& r = records_.at(id);
    h.add(id);
    h.add(r.phase);
    h.add(r.voxels);
  }
  return h.value();
}

// ---------------------------------------------------------------------------

ClusterMap base_clustering(const VoxelGrid& grid, const FeatureDataset& features,
                           const std::map<int, int>& clusters_per_phase, std::uint64_t seed,
                           int n_init) {
  const auto phases = grid.phases();
  for (const auto& [phase, count] : clusters_per_phase) {
    if (count > 0 && grid.count(phase) == 0)
      throw InvalidInput("phase " + std::to_string(phase) + " has no voxels but " +
                         std::to_string(count) + " clusters were requested");
  }
  ClusterMap map(grid.size());
  for (int phase : phases) {
    const auto it = clusters_per_phase.find(phase);
    require(it != clusters_per_phase.end(),
            "no cluster count given for phase " + std::to_string(phase));
    const int k = it->second;
    std::vector<int> voxels;
    for (int v = 0; v < grid.size(); ++v)
      if (grid.label(v) == phase) voxels.push_back(v);
    require(k >= 1 && k <= static_cast<int>(voxels.size()),
            "phase " + std::to_string(phase) + " cluster count " + std::to_string(k) +
                " must lie in [1, " + std::to_string(voxels.size()) + "]");
    const auto rows = features.subset(voxels);
    KMeansOptions opt;
    opt.k = k;
    opt.n_init = n_init;
    opt.seed = derive_seed(seed, static_cast<std::uint64_t>(phase) + 1000);
    const auto km = kmeans_lloyd(rows, opt);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < voxels.size(); ++i)
      groups[static_cast<std::size_t>(km.labels[i])].push_back(voxels[i]);
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (auto& g : groups) map.add_cluster(phase, std::move(g));
  }
  return map;
}

}  // namespace crom
