#include "crom/app/compare.hpp"

#include "crom/app/output.hpp"
#include "crom/app/run.hpp"
#include "crom/error.hpp"
#include "crom/oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace crom::app {
namespace {

namespace fs = std::filesystem;

std::string run_name(const fs::path& dir) {
  const auto p = dir.lexically_normal();
  const auto name = (p.has_filename() ? p.filename() : p.parent_path().filename()).string();
  return name.empty() ? p.string() : name;
}

/// Field dumps of one run: quantity -> increment -> path.
std::map<std::string, std::map<int, fs::path>> field_index(const fs::path& dir) {
  std::map<std::string, std::map<int, fs::path>> out;
  const auto fields = dir / "fields";
  if (!fs::exists(fields)) return out;
  for (const auto& entry : fs::directory_iterator(fields)) {
    const auto stem = entry.path().stem().string();
    const auto cut = stem.rfind('_');
    if (cut == std::string::npos || entry.path().extension() != ".bin") continue;
    out[stem.substr(0, cut)][std::stoi(stem.substr(cut + 1))] = entry.path();
  }
  return out;
}

const HistoryRow* row_at(const std::vector<HistoryRow>& rows, int increment) {
  for (const auto& r : rows)
    if (r.increment == increment) return &r;
  return nullptr;
}

std::string num(double x, const char* fmt = "%.17g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

}  // namespace

ComparisonReport compare_runs(const std::vector<fs::path>& dirs) {
  require(dirs.size() >= 2, "compare needs at least two run directories");
  const fs::path& ref_dir = dirs.back();
  const auto ref_hist = read_history(ref_dir / "history.csv");
  const auto ref_fields = field_index(ref_dir);
  const std::string ref_name = run_name(ref_dir);

  ComparisonReport report;
  auto& rows = report.rows;
  for (std::size_t d = 0; d + 1 < dirs.size(); ++d) {
    const auto hist = read_history(dirs[d] / "history.csv");
    const auto fields = field_index(dirs[d]);
    const std::string name = run_name(dirs[d]);

    const auto tr = history_toughness(hist), tref = history_toughness(ref_hist);
    rows.push_back({name, ref_name, "toughness", -1, "relative_error_percent", tr, tref,
                    relative_error(tr, tref)});

    // Stress at every shared checkpoint, plus the last shared increment.
    std::set<int> mine, theirs, increments;
    if (fields.count("acc_p"))
      for (const auto& [inc, _] : fields.at("acc_p")) mine.insert(inc);
    if (ref_fields.count("acc_p"))
      for (const auto& [inc, _] : ref_fields.at("acc_p")) theirs.insert(inc);
    std::set_intersection(mine.begin(), mine.end(), theirs.begin(), theirs.end(),
                          std::inserter(increments, increments.end()));
    if (mine != theirs) {
      std::string note = "checkpoints of " + name + " and " + ref_name + " differ; using";
      for (int inc : increments) note += " " + std::to_string(inc);
      if (increments.empty()) note += " none";
      report.notes.push_back(note);
    }
    int last_shared = 0;
    for (const auto& r : hist)
      if (row_at(ref_hist, r.increment)) last_shared = std::max(last_shared, r.increment);
    if (last_shared > 0) increments.insert(last_shared);
    for (int inc : increments) {
      const auto* a = row_at(hist, inc);
      const auto* b = row_at(ref_hist, inc);
      if (!a || !b) continue;
      rows.push_back({name, ref_name, "stress_xx", inc, "relative_error_percent", a->stress_xx,
                      b->stress_xx, relative_error(a->stress_xx, b->stress_xx)});
    }

    for (const char* q : {"acc_p", "plastic_work"}) {
      if (!fields.count(q) || !ref_fields.count(q)) continue;
      for (const auto& [inc, path] : fields.at(q)) {
        const auto it = ref_fields.at(q).find(inc);
        if (!increments.count(inc) || it == ref_fields.at(q).end()) continue;
        const auto a = read_field(path);
        const auto b = read_field(it->second);
        require(a.dims == b.dims, "field grids differ between " + path.string() + " and " +
                                      it->second.string());
        double mean_ref = 0.0;
        for (double v : b.values) mean_ref += v;
        mean_ref /= static_cast<double>(b.values.size());
        rows.push_back({name, ref_name, q, inc, "rmse", 0.0, mean_ref, rmse_field(a.values, b.values)});
      }
    }
  }
  return report;
}

void write_comparison_csv(const fs::path& path, const std::vector<ComparisonRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "run,reference,quantity,increment,metric,value,reference_value,error\n";
  for (const auto& r : rows)
    out << r.run << ',' << r.reference << ',' << r.quantity << ',' << r.increment << ','
        << r.metric << ',' << num(r.value) << ',' << num(r.reference_value) << ','
        << num(r.error) << '\n';
}

std::string format_comparison(const ComparisonReport& report) {
  std::ostringstream out;
  for (const auto& n : report.notes) out << "note: " << n << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-16s %-13s %9s %-8s %14s %14s %12s\n", "run",
                "reference", "quantity", "increment", "metric", "value", "reference", "error");
  out << line;
  for (const auto& r : report.rows) {
    const std::string inc = r.increment < 0 ? "-" : std::to_string(r.increment);
    const bool rel = r.metric == "relative_error_percent";
    std::snprintf(line, sizeof line, "%-16s %-16s %-13s %9s %-8s %14s %14s %11s%s\n",
                  r.run.c_str(), r.reference.c_str(), r.quantity.c_str(), inc.c_str(),
                  rel ? "rel.err" : "rmse", rel ? num(r.value, "%.6g").c_str() : "-",
                  num(r.reference_value, "%.6g").c_str(), num(r.error, "%.4g").c_str(),
                  rel ? "%" : " ");
    out << line;
  }
  return out.str();
}

}  // namespace crom::app
