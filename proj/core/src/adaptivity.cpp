#include "crom/adaptivity.hpp"

#include "crom/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace crom {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void AdaptivityConfig::validate() const {
  require(trigger_ratio >= 0.0 && trigger_ratio <= 1.0, "trigger_ratio must lie in [0, 1]");
  require(child_volume_fraction > 0.0 && child_volume_fraction <= 1.0,
          "child_volume_fraction must lie in (0, 1]");
  require(split_factor >= 0.0 && split_factor <= 1.0, "split_factor must lie in [0, 1]");
  require(split_amplitude >= 0.0 && split_amplitude <= 1.0, "split_amplitude must lie in [0, 1]");
  require(magnitude_exponent > 0.0, "magnitude_exponent must be positive");
  require(theta_low >= 0.0 && theta_low <= 1.0, "theta_low must lie in [0, 1]");
  require(frequency >= 1, "frequency must be at least 1");
  require(max_consecutive_steps >= 1, "max_consecutive_steps must be at least 1");
  require(cluster_budget >= 1, "cluster_budget must be at least 1");
  require(min_feature_value >= 0.0, "min_feature_value must be nonnegative");
  require(max_level >= 0, "max_level must be nonnegative");
  require(max_level_gap >= 0, "max_level_gap must be nonnegative");
  require(min_voxels_per_cluster >= 1, "min_voxels_per_cluster must be at least 1");
  require(scan_frequency >= 1, "scan_frequency must be at least 1");
  require(kmeans_n_init >= 1, "kmeans_n_init must be at least 1");
  require(max_rewinds >= 0, "max_rewinds must be nonnegative");
}

const TargetEntry* TargetSet::find(int cluster) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), cluster,
                                   [](const TargetEntry& e, int id) { return e.cluster < id; });
  return it != entries.end() && it->cluster == cluster ? &*it : nullptr;
}

// ---------------------------------------------------------------------------

std::vector<double> cluster_feature(std::span<const ClusterState> states, const ClusterMap& map,
                                    AdaptivityFeature feature,
                                    const FeatureDataset* strain_concentration) {
  require(states.size() == sz(map.n_active()), "one state per active cluster is required");
  std::vector<double> out(sz(map.n_active()));
  for (int i = 0; i < map.n_active(); ++i) {
    switch (feature) {
      case AdaptivityFeature::acc_p:
        out[sz(i)] = states[sz(i)].acc_p;
        break;
      case AdaptivityFeature::plastic_work:
        out[sz(i)] = states[sz(i)].plastic_work;
        break;
      case AdaptivityFeature::h_norm: {
        require(strain_concentration != nullptr, "h_norm feature needs strain concentration data");
        const auto rows = strain_concentration->subset(map.active(i).voxels);
        double s = 0.0;
        for (int r = 0; r < rows.rows(); ++r) {
          double q = 0.0;
          for (double x : rows.row(r)) q += x * x;
          s += std::sqrt(q);
        }
        out[sz(i)] = s / rows.rows();
        break;
      }
      default:
        throw InvalidInput("unknown adaptivity feature");
    }
  }
  return out;
}

std::vector<double> reconstruct_field(const ClusterMap& map, std::span<const double> values) {
  require(values.size() == sz(map.n_active()), "one value per active cluster is required");
  std::vector<double> field(sz(map.voxel_count()));
  for (int v = 0; v < map.voxel_count(); ++v)
    field[sz(v)] = values[sz(map.index_of(map.label(v)))];
  return field;
}

std::vector<double> reconstruct_voxel_feature(std::span<const ClusterState> states,
                                              const ClusterMap& map, AdaptivityFeature feature,
                                              const FeatureDataset* strain_concentration) {
  return reconstruct_field(map, cluster_feature(states, map, feature, strain_concentration));
}

std::set<int> evaluate_adaptivity_conditions(int increment, int consecutive_steps,
                                             int n_clusters,
                                             const std::map<int, double>& phase_max_feature,
                                             const AdaptivityConfig& cfg) {
  std::set<int> out;
  if (increment % cfg.frequency != 0) return out;
  if (consecutive_steps >= cfg.max_consecutive_steps) return out;
  if (n_clusters >= cfg.cluster_budget) return out;
  for (const auto& [phase, value] : phase_max_feature)
    if (cfg.adaptive_phases.count(phase) && value >= cfg.min_feature_value) out.insert(phase);
  return out;
}

// ---------------------------------------------------------------------------

TargetSet select_targets(std::span<const double> field, const VoxelGrid& grid,
                         const ClusterMap& map, const std::set<int>& eligible_phases,
                         const AdaptivityConfig& cfg, Rng& rng) {
  require(field.size() == sz(grid.size()) && map.voxel_count() == grid.size(),
          "feature field does not match the grid");
  TargetSet out;
  if (cfg.trigger_ratio >= 1.0 || eligible_phases.empty()) return out;

  std::map<int, std::pair<double, double>> range;
  for (int v = 0; v < grid.size(); ++v) {
    const int p = grid.label(v);
    if (!eligible_phases.count(p)) continue;
    auto [it, fresh] = range.try_emplace(p, field[sz(v)], field[sz(v)]);
    if (!fresh) {
      it->second.first = std::min(it->second.first, field[sz(v)]);
      it->second.second = std::max(it->second.second, field[sz(v)]);
    }
  }

  std::map<int, TargetEntry> marked;
  auto eligible_cluster = [&](int id) {
    const auto& r = map.record(id);
    return r.level < cfg.max_level &&
           static_cast<int>(r.voxels.size()) >= std::max(2, 2 * cfg.min_voxels_per_cluster);
  };
  auto mark = [&](int id, double jump, double magnitude) {
    if (!eligible_cluster(id)) return;
    auto [it, fresh] = marked.try_emplace(id, TargetEntry{id, jump, magnitude});
    if (!fresh) {
      it->second.max_jump = std::max(it->second.max_jump, jump);
      it->second.magnitude = std::max(it->second.magnitude, magnitude);
    }
  };

  const auto& dims = grid.dims();
  const int X = cfg.scan_frequency;
  for (int axis = 0; axis < grid.ndim(); ++axis) {
    const int n_axis = dims[sz(axis)];
    const int offset = static_cast<int>(rng.below(static_cast<std::uint64_t>(X)));
    int stride = 1;
    for (int d = grid.ndim() - 1; d > axis; --d) stride *= dims[sz(d)];
    for (int v = 0; v < grid.size(); ++v) {
      const int i = (v / stride) % n_axis;
      if (i != 0 && i != n_axis - 1 && ((i - offset) % X + X) % X != 0) continue;
      const int w = i == n_axis - 1 ? v - i * stride : v + stride;
      const int a = map.label(v), b = map.label(w);
      if (a == b) continue;
      const int phase = grid.label(v);
      if (phase != grid.label(w) || !eligible_phases.count(phase)) continue;
      const auto [lo, hi] = range.at(phase);
      if (!(hi > lo)) continue;
      const double jump = std::abs(field[sz(v)] - field[sz(w)]) / (hi - lo);
      if (jump < cfg.trigger_ratio) continue;
      const double s = jump - cfg.trigger_ratio;
      const bool a_high = field[sz(v)] >= field[sz(w)];
      const double s_a = a_high ? s : cfg.theta_low * s;
      const double s_b = a_high && field[sz(v)] != field[sz(w)] ? cfg.theta_low * s : s;
      const int la = map.record(a).level, lb = map.record(b).level;
      if (std::abs(la - lb) > cfg.max_level_gap) {
        if (la < lb)
          mark(a, jump, s_a);
        else
          mark(b, jump, s_b);
      } else {
        mark(a, jump, s_a);
        mark(b, jump, s_b);
      }
    }
  }
  for (const auto& [id, e] : marked) out.entries.push_back(e);
  return out;
}

int child_count(const TargetEntry& target, const AdaptivityConfig& cfg, int voxels) {
  const int n_max = nint(1.0 / cfg.child_volume_fraction);
  double gamma = cfg.split_factor;
  if (cfg.split_amplitude > 0.0) {
    const double span = 1.0 - cfg.trigger_ratio;
    const double s = std::clamp(target.magnitude, 0.0, span);
    const double g = span > 0.0 ? std::pow(s / span, cfg.magnitude_exponent) : 1.0;
    gamma = std::clamp(cfg.split_factor - 0.5 * cfg.split_amplitude + g * cfg.split_amplitude, 0.0, 1.0);
  }
  const int n = std::max(2, nint(gamma * n_max));
  return std::min(n, voxels / cfg.min_voxels_per_cluster);
}

std::vector<TargetEntry> enforce_budget(const TargetSet& targets,
                                        const std::map<int, int>& child_counts,
                                        const AdaptivityConfig& cfg, int n_clusters) {
  std::vector<TargetEntry> order = targets.entries;
  std::stable_sort(order.begin(), order.end(), [](const TargetEntry& x, const TargetEntry& y) {
    if (x.magnitude != y.magnitude) return x.magnitude > y.magnitude;
    if (x.max_jump != y.max_jump) return x.max_jump > y.max_jump;
    return x.cluster < y.cluster;
  });
  std::vector<TargetEntry> accepted;
  int projected = n_clusters;
  for (const auto& t : order) {
    if (projected >= cfg.cluster_budget) break;
    const auto it = child_counts.find(t.cluster);
    require(it != child_counts.end(), "missing child count for target " + std::to_string(t.cluster));
    accepted.push_back(t);
    projected += it->second - 1;
  }
  return accepted;
}

std::vector<int> split_cluster(ClusterMap& map, int parent, int n_child,
                               const FeatureDataset& features, std::uint64_t seed, int increment,
                               int n_init) {
  const auto& voxels = map.record(parent).voxels;
  require(n_child >= 1 && n_child <= static_cast<int>(voxels.size()),
          "child count " + std::to_string(n_child) + " exceeds the parent's " +
              std::to_string(voxels.size()) + " voxels");
  const auto rows = features.subset(voxels);
  KMeansOptions opt;
  opt.k = n_child;
  opt.n_init = n_init;
  opt.seed = seed;
  opt.mini_batch = std::min(1024, rows.rows());
  const auto km = kmeans_lloyd(rows, opt);
  std::vector<std::vector<int>> groups(sz(n_child));
  for (std::size_t i = 0; i < voxels.size(); ++i) groups[sz(km.labels[i])].push_back(voxels[i]);
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return map.split(parent, groups, increment);
}

std::vector<ClusterState> inherit_states(const ClusterMap& old_map, const ClusterMap& new_map,
                                         std::span<const ClusterState> states) {
  require(states.size() == sz(old_map.n_active()), "one state per active cluster is required");
  std::vector<ClusterState> out;
  out.reserve(sz(new_map.n_active()));
  for (int id : new_map.active_ids()) {
    int a = id;
    while (!old_map.is_active(a)) {
      a = new_map.contains(a) ? new_map.record(a).parent : -1;
      if (a < 0)
        throw InternalError("cluster " + std::to_string(id) + " has no ancestor in the source clustering");
    }
    out.push_back(states[sz(old_map.index_of(a))]);
  }
  return out;
}

// ---------------------------------------------------------------------------

AdaptivityOutcome adaptivity_step(const VoxelGrid& grid, const ClusterMap& map,
                                  const InteractionMatrix& cit,
                                  std::span<const ClusterState> states,
                                  const FeatureDataset& features, const GreenOperator& green,
                                  const AdaptivityConfig& cfg, const std::set<int>& phases,
                                  int increment, std::uint64_t seed) {
  AdaptivityOutcome out;
  out.event.increment = increment;
  out.event.clusters_before = map.n_active();

  auto t0 = std::chrono::steady_clock::now();
  const auto field = reconstruct_voxel_feature(states, map, cfg.feature, &features);
  Rng rng(derive_seed(seed, 0xA));
  const auto targets = select_targets(field, grid, map, phases, cfg, rng);
  out.event.seconds_select = seconds_since(t0);
  if (targets.empty()) return out;

  t0 = std::chrono::steady_clock::now();
  std::map<int, int> counts;
  for (const auto& t : targets.entries)
    counts[t.cluster] = child_count(t, cfg, static_cast<int>(map.record(t.cluster).voxels.size()));
  auto accepted = enforce_budget(targets, counts, cfg, map.n_active());
  if (accepted.empty()) return out;
  std::sort(accepted.begin(), accepted.end(),
            [](const TargetEntry& a, const TargetEntry& b) { return a.cluster < b.cluster; });
  out.map = map;
  for (const auto& t : accepted) {
    const int n_child = counts.at(t.cluster);
    split_cluster(out.map, t.cluster, n_child, features,
                  derive_seed(seed, static_cast<std::uint64_t>(t.cluster) + 0x100), increment,
                  cfg.kmeans_n_init);
    out.event.targets.push_back(t);
    out.event.child_counts.push_back(n_child);
  }
  out.map.validate(grid);
  out.event.seconds_split = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  out.cit = incremental_update(cit, map, out.map, green);
  out.event.seconds_cit = seconds_since(t0);
  out.event.cit_full = out.cit.full_count();
  out.event.cit_symmetry = out.cit.symmetry_count();
  out.event.clusters_after = out.map.n_active();
  out.performed = true;
  return out;
}

// ---------------------------------------------------------------------------

bool rewind_trigger(std::span<const ClusterState> states) {
  return std::any_of(states.begin(), states.end(), [](const ClusterState& s) { return s.acc_p > 0.0; });
}

RewindState store_rewind_state(const RunState& start, int increment) {
  require(start.states.size() == sz(start.map.n_active()), "run state is inconsistent");
  return RewindState{increment, start, start.map.hash()};
}

RunState perform_rewind(const RewindState& rewind, const ClusterMap& new_map,
                        const InteractionMatrix& new_cit) {
  if (rewind.snapshot.map.hash() != rewind.map_hash)
    throw InternalError("rewind snapshot does not match its recorded clustering");
  RunState out = rewind.snapshot;
  out.states = inherit_states(rewind.snapshot.map, new_map, rewind.snapshot.states);
  out.map = new_map;
  out.cit = new_cit;
  return out;
}

// ---------------------------------------------------------------------------

OnlineResult run_online(const OnlineProblem& problem, const ClusterMap& base,
                        const OnlineObserver& observer) {
  require(problem.grid && problem.materials && problem.features, "online problem is incomplete");
  const auto& grid = *problem.grid;
  const auto& materials = *problem.materials;
  problem.loading.validate();
  problem.solver.validate();
  problem.fracture.validate();
  if (problem.adaptivity) problem.adaptivity->validate();
  base.validate(grid);

  const ReferenceMaterial ref0 = initial_reference(problem.solver, grid, materials);
  const GreenOperator green(ref0, FrequencyGrid(grid));

  OnlineResult result;
  RunState& state = result.state;
  state.map = base;
  state.cit = assemble_matrix(base, green);
  state.states.assign(sz(base.n_active()), ClusterState{});
  state.reference = ref0;
  HistoryRecord origin;
  origin.n_clusters = base.n_active();
  origin.reference = ref0;
  state.history.push_back(origin);

  std::optional<RewindState> rewind;
  int consecutive = 0;
  int attempts = 0;
  const int count = static_cast<int>(problem.loading.increments.size());
  while (state.increment < count) {
    const int m = state.increment + 1;
    const RunState start = state;
    const auto inc = solve_increment(state.map, materials, state.cit, state.reference, state.states,
                                     problem.loading.increments[sz(m - 1)], problem.solver);
    state.states = inc.states;
    state.reference = inc.reference;

    const auto& ad = problem.adaptivity;
    if (ad && ad->rewind && !rewind && result.rewinds < ad->max_rewinds && rewind_trigger(state.states))
      rewind = store_rewind_state(start, m);

    bool adapted = false;
    if (ad) {
      const auto values = cluster_feature(state.states, state.map, ad->feature, problem.features);
      std::map<int, double> phase_max;
      for (int i = 0; i < state.map.n_active(); ++i) {
        const int p = state.map.active(i).phase;
        const auto it = phase_max.find(p);
        phase_max[p] = it == phase_max.end() ? values[sz(i)] : std::max(it->second, values[sz(i)]);
      }
      const auto phases =
          evaluate_adaptivity_conditions(m, consecutive, state.map.n_active(), phase_max, *ad);
      if (!phases.empty()) {
        auto step = adaptivity_step(grid, state.map, state.cit, state.states, *problem.features,
                                    green, *ad, phases, m,
                                    derive_seed(problem.seed, 0x51EB + static_cast<std::uint64_t>(attempts++)));
        if (step.performed) {
          adapted = true;
          ++consecutive;
          step.event.step = consecutive;
          if (ad->rewind && rewind && result.rewinds < ad->max_rewinds) {
            step.event.rewound = true;
            result.events.push_back(step.event);
            state = perform_rewind(*rewind, step.map, step.cit);
            ++result.rewinds;
            consecutive = 0;
            continue;
          }
          result.events.push_back(step.event);
          if (ad->repeat_increment) {
            RunState again = start;
            again.states = inherit_states(start.map, step.map, start.states);
            again.map = std::move(step.map);
            again.cit = std::move(step.cit);
            state = std::move(again);
            continue;
          }
          state.states = inherit_states(state.map, step.map, state.states);
          state.map = std::move(step.map);
          state.cit = std::move(step.cit);
        }
      }
    }
    if (!adapted) consecutive = 0;

    HistoryRecord rec;
    rec.increment = m;
    rec.totals = homogenize_totals(state.states, state.map);
    rec.n_clusters = state.map.n_active();
    rec.reference = state.reference;
    rec.fractured = check_fracture(state.states, state.map, problem.fracture);
    rec.newton_iterations = inc.newton_iterations;
    rec.sc_iterations = inc.sc_iterations;
    rec.sc_unconverged = inc.sc_unconverged;
    rec.cuts = inc.cuts;
    if (rec.fractured && !state.fracture_increment) state.fracture_increment = m;
    state.history.push_back(rec);
    state.increment = m;
    if (observer) observer(state);
  }
  return result;
}

}  // namespace crom
