#pragma once

// Run output files. Every file starts with the same identification line
//   # crom config_hash=<16 hex digits> seed=<seed>
// followed by its own content.

#include "crom/adaptivity.hpp"
#include "crom/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crom::app {

struct FileTag {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  std::string line() const;
};

/// One row of history.csv; shear components are tensor components.
struct HistoryRow {
  int increment = 0;
  double strain_xx = 0.0, strain_yy = 0.0, strain_xy = 0.0;
  double stress_xx = 0.0, stress_yy = 0.0, stress_xy = 0.0;
  int n_clusters = 0;
  double lambda0 = 0.0, mu0 = 0.0;
  bool fractured = false;
  int newton_iterations = 0;
  int sc_iterations = 0;
  bool sc_unconverged = false;
  int cuts = 0;
};

HistoryRow history_row(const HistoryRecord& record);

void write_history(const std::filesystem::path& path, const FileTag& tag,
                   const std::vector<HistoryRow>& rows);
std::vector<HistoryRow> read_history(const std::filesystem::path& path);

/// Voxel field: text header terminated by "end\n", then little-endian
/// float64 values in grid order.
struct FieldDump {
  std::string name;
  int increment = 0;
  std::vector<int> dims;
  std::vector<double> values;
};

std::filesystem::path field_path(const std::filesystem::path& dir, const std::string& name,
                                 int increment);
void write_field(const std::filesystem::path& path, const FileTag& tag, const FieldDump& field);
FieldDump read_field(const std::filesystem::path& path);

/// Cluster label per voxel, row-major, one grid row per line.
void write_labels(const std::filesystem::path& path, const FileTag& tag,
                  const std::vector<int>& dims, const std::vector<int>& labels);
std::vector<int> read_labels(const std::filesystem::path& path);

/// Deterministic adaptivity event log (timings are kept in the manifest).
void write_events(const std::filesystem::path& path, const FileTag& tag,
                  const std::vector<AdaptivityEvent>& events);

std::string hex64(std::uint64_t value);

}  // namespace crom::app
