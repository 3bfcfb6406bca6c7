#pragma once

// Comparison of run output directories against a reference run.

#include <filesystem>
#include <string>
#include <vector>

namespace crom::app {

struct ComparisonRow {
  std::string run;
  std::string reference;
  /// stress_xx, toughness, acc_p or plastic_work.
  std::string quantity;
  /// Increment the value refers to; -1 for run-wide quantities.
  int increment = -1;
  /// relative_error_percent or rmse.
  std::string metric;
  double value = 0.0;
  /// Reference value; the mean of the reference field for rmse rows.
  double reference_value = 0.0;
  double error = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  /// Checkpoint mismatches and the intersections used instead.
  std::vector<std::string> notes;
};

/// The last directory is the reference; every other one is compared to it.
ComparisonReport compare_runs(const std::vector<std::filesystem::path>& dirs);

void write_comparison_csv(const std::filesystem::path& path,
                          const std::vector<ComparisonRow>& rows);
std::string format_comparison(const ComparisonReport& report);

}  // namespace crom::app
