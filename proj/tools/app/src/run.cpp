#include "crom/app/run.hpp"

#include "crom/app/rve.hpp"
#include "crom/adaptivity.hpp"
#include "crom/cit.hpp"
#include "crom/error.hpp"
#include "crom/oracle.hpp"
#include "crom/parallel.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <ostream>
#include <set>

#ifndef CROM_VERSION
#define CROM_VERSION "unknown"
#endif

namespace crom::app {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

const char* const kFields[] = {"acc_p", "plastic_work", "strain_xx", "stress_xx"};

std::vector<double> field_values(std::span<const ClusterState> states, const std::string& name) {
  std::vector<double> v;
  v.reserve(states.size());
  for (const auto& s : states) {
    if (name == "acc_p")
      v.push_back(s.acc_p);
    else if (name == "plastic_work")
      v.push_back(s.plastic_work);
    else if (name == "strain_xx")
      v.push_back(s.strain(0));
    else
      v.push_back(s.stress(0));
  }
  return v;
}

bool voxel_fracture(std::span<const ClusterState> states, const VoxelGrid& grid,
                    const FractureCriterion& crit) {
  int phase = 0, failed = 0;
  for (int v = 0; v < grid.size(); ++v) {
    if (grid.label(v) != crit.phase) continue;
    ++phase;
    if (states[sz(v)].acc_p > crit.acc_p_threshold) ++failed;
  }
  require(phase > 0, "fracture phase " + std::to_string(crit.phase) + " is not present");
  return static_cast<double>(failed) / phase >= crit.volume_fraction_threshold;
}

class Writer {
 public:
  Writer(fs::path dir, FileTag tag, std::vector<int> dims)
      : dir_(std::move(dir)), tag_(tag), dims_(std::move(dims)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }
  const FileTag& tag() const { return tag_; }

  void fields(int increment, std::span<const ClusterState> voxel_states) {
    for (const char* name : kFields) {
      FieldDump f{name, increment, dims_, field_values(voxel_states, name)};
      const auto p = field_path(dir_, name, increment);
      write_field(p, tag_, f);
      note(p);
    }
  }

  void labels(const std::string& stem, const std::vector<int>& labels) {
    const auto p = dir_ / "labels" / (stem + ".txt");
    write_labels(p, tag_, dims_, labels);
    note(p);
  }

  void history(const std::vector<HistoryRow>& rows) {
    write_history(dir_ / "history.csv", tag_, rows);
    note(dir_ / "history.csv");
  }

  void events(const std::vector<AdaptivityEvent>& events) {
    write_events(dir_ / "adaptivity_events.csv", tag_, events);
    note(dir_ / "adaptivity_events.csv");
  }

  void note(const fs::path& p) { files_.insert(fs::relative(p, dir_).generic_string()); }
  const std::set<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  FileTag tag_;
  std::vector<int> dims_;
  std::set<std::string> files_;
};

std::string label_stem(int increment) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "labels_%06d", increment);
  return buf;
}

nlohmann::json base_manifest(const RunConfig& cfg, const FileTag& tag) {
  nlohmann::json j;
  j["crom_version"] = CROM_VERSION;
  j["mode"] = mode_name(cfg.mode);
  j["seed"] = cfg.seed;
  j["config_hash"] = hex64(tag.config_hash);
  j["threads"] = num_threads();
  j["config"] = serialize_config(cfg);
  return j;
}

void write_manifest(const fs::path& dir, nlohmann::json j, const Writer& w) {
  j["files"] = w.files();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw InvalidInput("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << "\n";
}

void log_line(const RunOptions& o, const std::string& s) {
  if (o.log) *o.log << s << std::endl;
}

RunSummary run_cit_bench(const RunConfig& cfg, const RunOptions& opts, const FileTag& tag) {
  const auto& b = cfg.bench;
  RunSummary summary;
  summary.output = cfg.output;
  const VoxelGrid grid(b.dims, {1.0, 1.0}, std::vector<int>(sz(b.dims[0] * b.dims[1]), 0));
  log_line(opts, "cit-bench: n_init=" + std::to_string(b.n_init));
  const auto r = benchmark_cit_update(grid, b.n_init, b.alpha, b.beta, cfg.seed, b.repeats);
  Writer w(cfg.output, tag, b.dims);
  {
    std::ofstream out(w.dir() / "cit_bench.csv");
    out << tag.line() << "\n";
    out << "n_init,n_old,n_new,alpha,beta,standard_full,standard_symmetry,proposed_full,"
           "proposed_symmetry,max_difference\n";
    out.precision(17);
    out << r.n_init << ',' << r.n_old << ',' << r.n_new << ',' << b.alpha << ',' << b.beta << ','
        << r.standard_full << ',' << r.standard_symmetry << ',' << r.proposed_full << ','
        << r.proposed_symmetry << ',' << r.max_difference << '\n';
    w.note(w.dir() / "cit_bench.csv");
  }
  auto j = base_manifest(cfg, tag);
  j["status"] = "completed";
  j["grid_hash"] = hex64(grid.hash());
  j["timings"] = {{"standard_seconds", r.standard_seconds},
                  {"proposed_seconds", r.proposed_seconds},
                  {"speedup", r.proposed_seconds > 0 ? r.standard_seconds / r.proposed_seconds : 0.0}};
  write_manifest(w.dir(), j, w);
  return summary;
}

RunSummary run_oracle(const RunConfig& cfg, const RunOptions& opts, const FileTag& tag,
                      const VoxelGrid& grid) {
  RunSummary summary;
  summary.output = cfg.output;
  Writer w(cfg.output, tag, grid.dims());
  const auto checkpoints = cfg.checkpoint_increments();
  const ReferenceMaterial ref =
      cfg.oracle.reference ? *cfg.oracle.reference : voigt_reference(grid, cfg.materials);

  std::vector<HistoryRow> rows;
  const auto t0 = Clock::now();
  try {
    auto observer = [&](int m, std::span<const ClusterState> states) {
      Homogenized h;
      for (const auto& s : states) {
        h.strain += s.strain;
        h.stress += in_plane(s.stress);
      }
      h.strain /= static_cast<double>(states.size());
      h.stress /= static_cast<double>(states.size());
      HistoryRecord rec;
      rec.increment = m;
      rec.totals = h;
      rec.n_clusters = grid.size();
      rec.reference = ref;
      rec.fractured = voxel_fracture(states, grid, cfg.fracture);
      rows.push_back(history_row(rec));
      if (std::binary_search(checkpoints.begin(), checkpoints.end(), m)) w.fields(m, states);
      if (m % 10 == 0) log_line(opts, "oracle: increment " + std::to_string(m));
    };
    // Fixed-point iterations are reported in the newton_iterations column.
    const auto sol =
        solve_full_field(grid, cfg.materials, cfg.loading.path(), cfg.oracle, {}, observer);
    for (std::size_t k = 0; k < sol.increments.size() && k < rows.size(); ++k) {
      rows[k].newton_iterations = sol.increments[k].iterations;
      rows[k].cuts = sol.increments[k].cuts;
    }
  } catch (const std::exception& e) {
    summary.status = "failed";
    summary.error = e.what();
  }
  const double online = seconds_since(t0);
  w.history(rows);
  summary.history = rows;
  summary.increments = rows.empty() ? 0 : rows.back().increment;
  summary.fracture_increment = history_fracture(rows);
  summary.toughness = history_toughness(rows);
  summary.final_clusters = grid.size();

  auto j = base_manifest(cfg, tag);
  j["status"] = summary.status;
  if (!summary.error.empty()) j["error"] = summary.error;
  j["grid_hash"] = hex64(grid.hash());
  j["increments_completed"] = summary.increments;
  j["fracture_increment"] =
      summary.fracture_increment ? nlohmann::json(*summary.fracture_increment) : nlohmann::json();
  j["toughness"] = summary.toughness;
  j["timings"] = {{"online_seconds", online}};
  write_manifest(w.dir(), j, w);
  return summary;
}

RunSummary run_reduced(const RunConfig& cfg, const RunOptions& opts, const FileTag& tag,
                       const VoxelGrid& grid) {
  RunSummary summary;
  summary.output = cfg.output;
  Writer w(cfg.output, tag, grid.dims());
  const auto checkpoints = cfg.checkpoint_increments();

  log_line(opts, "offline: features and base clustering");
  const auto offline = prepare_offline(cfg, grid);
  w.labels("base", offline.base.labels());

  OnlineProblem problem;
  problem.grid = &grid;
  problem.materials = &cfg.materials;
  problem.features = &offline.features;
  problem.loading = cfg.loading.path();
  problem.solver = cfg.solver;
  problem.fracture = cfg.fracture;
  if (cfg.mode == Mode::asca) problem.adaptivity = cfg.adaptivity;
  problem.seed = cfg.seed;

  std::optional<RunState> last;
  auto observer = [&](const RunState& s) {
    last = s;
    const int m = s.increment;
    if (std::binary_search(checkpoints.begin(), checkpoints.end(), m)) {
      std::vector<ClusterState> voxel(sz(grid.size()));
      for (int i = 0; i < s.map.n_active(); ++i)
        for (int v : s.map.active(i).voxels) voxel[sz(v)] = s.states[sz(i)];
      w.fields(m, voxel);
      w.labels(label_stem(m), s.map.labels());
    }
    if (m % 10 == 0)
      log_line(opts, mode_name(cfg.mode) + ": increment " + std::to_string(m) + ", " +
                         std::to_string(s.map.n_active()) + " clusters");
  };

  const auto t0 = Clock::now();
  OnlineResult result;
  try {
    result = run_online(problem, offline.base, observer);
    last = result.state;
  } catch (const std::exception& e) {
    summary.status = "failed";
    summary.error = e.what();
    log_line(opts, "run failed: " + summary.error);
  }
  const double online = seconds_since(t0);

  std::vector<HistoryRow> rows;
  if (last) {
    for (const auto& r : last->history)
      if (r.increment > 0) rows.push_back(history_row(r));
    w.labels("final", last->map.labels());
  }
  w.history(rows);
  if (cfg.mode == Mode::asca) w.events(result.events);

  summary.history = rows;
  summary.increments = rows.empty() ? 0 : rows.back().increment;
  summary.fracture_increment = history_fracture(rows);
  summary.toughness = history_toughness(rows);
  summary.final_clusters = last ? last->map.n_active() : offline.base.n_active();
  summary.events = static_cast<int>(result.events.size());
  summary.rewinds = result.rewinds;

  auto j = base_manifest(cfg, tag);
  j["status"] = summary.status;
  if (!summary.error.empty()) j["error"] = summary.error;
  j["grid_hash"] = hex64(grid.hash());
  j["base_map_hash"] = hex64(offline.base.hash());
  if (last) j["final_map_hash"] = hex64(last->map.hash());
  j["increments_completed"] = summary.increments;
  j["fracture_increment"] =
      summary.fracture_increment ? nlohmann::json(*summary.fracture_increment) : nlohmann::json();
  j["toughness"] = summary.toughness;
  j["clusters_base"] = offline.base.n_active();
  j["clusters_final"] = summary.final_clusters;
  j["adaptivity_events"] = summary.events;
  j["rewinds"] = summary.rewinds;
  double adapt_select = 0.0, adapt_split = 0.0, adapt_cit = 0.0;
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : result.events) {
    adapt_select += e.seconds_select;
    adapt_split += e.seconds_split;
    adapt_cit += e.seconds_cit;
    events.push_back({{"increment", e.increment},
                      {"step", e.step},
                      {"seconds_select", e.seconds_select},
                      {"seconds_split", e.seconds_split},
                      {"seconds_cit", e.seconds_cit}});
  }
  j["timings"] = {{"offline_features_seconds", offline.seconds_features},
                  {"offline_clustering_seconds", offline.seconds_clustering},
                  {"online_seconds", online},
                  {"adaptivity_select_seconds", adapt_select},
                  {"adaptivity_split_seconds", adapt_split},
                  {"adaptivity_cit_seconds", adapt_cit},
                  {"adaptivity_events", events}};
  write_manifest(w.dir(), j, w);
  return summary;
}

}  // namespace

OfflineData prepare_offline(const RunConfig& cfg, const VoxelGrid& grid) {
  OfflineData d;
  auto t0 = Clock::now();
  d.features = strain_concentration_features(grid, cfg.materials, cfg.oracle);
  d.seconds_features = seconds_since(t0);
  t0 = Clock::now();
  for (int phase : grid.phases())
    require(cfg.clusters.count(phase) != 0,
            "no cluster count configured for phase " + std::to_string(phase));
  d.base = base_clustering(grid, d.features, cfg.clusters, derive_seed(cfg.seed, 0xBA5E),
                           cfg.kmeans_n_init);
  d.seconds_clustering = seconds_since(t0);
  return d;
}

std::optional<int> history_fracture(const std::vector<HistoryRow>& rows) {
  for (const auto& r : rows)
    if (r.fractured) return r.increment;
  return std::nullopt;
}

double history_toughness(const std::vector<HistoryRow>& rows) {
  std::vector<double> e{0.0}, s{0.0};
  std::optional<int> last;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    e.push_back(rows[k].strain_xx);
    s.push_back(rows[k].stress_xx);
    if (!last && rows[k].fractured) last = static_cast<int>(k + 1);
  }
  return compute_toughness(e, s, last);
}

RunSummary run(RunConfig cfg, const RunOptions& opts) {
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.output) cfg.output = opts.output->string();
  const FileTag tag{config_hash(cfg), cfg.seed};
  if (cfg.mode == Mode::cit_bench) return run_cit_bench(cfg, opts, tag);

  for (const auto& [phase, m] : cfg.materials) m.validate();
  const VoxelGrid grid = load_rve(cfg.rve, opts.config_dir);
  for (int phase : grid.phases())
    require(cfg.materials.count(phase) != 0,
            "no material configured for phase " + std::to_string(phase));
  if (cfg.mode == Mode::oracle) return run_oracle(cfg, opts, tag, grid);
  return run_reduced(cfg, opts, tag, grid);
}

}  // namespace crom::app
