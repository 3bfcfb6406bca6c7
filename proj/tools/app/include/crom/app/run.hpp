#pragma once

// End-to-end execution of a run configuration: offline stage (strain
// concentration features, base clustering), online stage (reduced or
// full-field) and output files.

#include "crom/app/config.hpp"
#include "crom/app/output.hpp"
#include "crom/clustering.hpp"
#include "crom/spectral.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crom::app {

struct RunOptions {
  /// Base directory for relative RVE file paths.
  std::filesystem::path config_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  /// Progress messages; silent when null.
  std::ostream* log = nullptr;
};

struct RunSummary {
  std::filesystem::path output;
  /// "completed" or "failed"; failed runs keep the outputs written so far.
  std::string status = "completed";
  std::string error;
  int increments = 0;
  std::optional<int> fracture_increment;
  double toughness = 0.0;
  int final_clusters = 0;
  int events = 0;
  int rewinds = 0;
  /// Increments 1..n; the unloaded state is implicit.
  std::vector<HistoryRow> history;
};

struct OfflineData {
  FeatureDataset features;
  ClusterMap base;
  double seconds_features = 0.0;
  double seconds_clustering = 0.0;
};

/// Strain concentration features and the per-phase base clustering.
OfflineData prepare_offline(const RunConfig& config, const VoxelGrid& grid);

/// Area under the xx stress-strain history, starting from the unloaded
/// state, up to the first fractured increment (or the whole history).
double history_toughness(const std::vector<HistoryRow>& rows);

/// First increment flagged as fractured.
std::optional<int> history_fracture(const std::vector<HistoryRow>& rows);

RunSummary run(RunConfig config, const RunOptions& options = {});

}  // namespace crom::app
