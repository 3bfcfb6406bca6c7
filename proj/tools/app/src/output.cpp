#include "crom/app/output.hpp"

#include "crom/error.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace crom::app {
namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return in;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw InvalidInput(path.string() + ": bad number '" + s + "'");
  return v;
}

const char* kHistoryColumns =
    "increment,strain_xx,strain_yy,strain_xy,stress_xx,stress_yy,stress_xy,n_clusters,lambda0,"
    "mu0,fractured,newton_iterations,sc_iterations,sc_unconverged,cuts";

}  // namespace

std::string hex64(std::uint64_t value) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << value;
  return s.str();
}

std::string FileTag::line() const {
  return "# crom config_hash=" + hex64(config_hash) + " seed=" + std::to_string(seed);
}

HistoryRow history_row(const HistoryRecord& r) {
  HistoryRow h;
  h.increment = r.increment;
  h.strain_xx = r.totals.strain(0);
  h.strain_yy = r.totals.strain(1);
  h.strain_xy = tensor_shear(r.totals.strain);
  h.stress_xx = r.totals.stress(0);
  h.stress_yy = r.totals.stress(1);
  h.stress_xy = tensor_shear(r.totals.stress);
  h.n_clusters = r.n_clusters;
  h.lambda0 = r.reference.lambda;
  h.mu0 = r.reference.mu;
  h.fractured = r.fractured;
  h.newton_iterations = r.newton_iterations;
  h.sc_iterations = r.sc_iterations;
  h.sc_unconverged = r.sc_unconverged;
  h.cuts = r.cuts;
  return h;
}

void write_history(const std::filesystem::path& path, const FileTag& tag,
                   const std::vector<HistoryRow>& rows) {
  auto out = open_out(path);
  out << tag.line() << "\n" << kHistoryColumns << "\n";
  for (const auto& r : rows)
    out << r.increment << ',' << num(r.strain_xx) << ',' << num(r.strain_yy) << ','
        << num(r.strain_xy) << ',' << num(r.stress_xx) << ',' << num(r.stress_yy) << ','
        << num(r.stress_xy) << ',' << r.n_clusters << ',' << num(r.lambda0) << ','
        << num(r.mu0) << ',' << int(r.fractured) << ',' << r.newton_iterations << ','
        << r.sc_iterations << ',' << int(r.sc_unconverged) << ',' << r.cuts << '\n';
}

std::vector<HistoryRow> read_history(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<HistoryRow> rows;
  bool header = false;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kHistoryColumns) throw InvalidInput(path.string() + ": unexpected columns");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 15) throw InvalidInput(path.string() + ": malformed row '" + line + "'");
    auto d = [&](int i) { return to_double(f[static_cast<std::size_t>(i)], path); };
    auto n = [&](int i) { return static_cast<int>(d(i)); };
    HistoryRow r;
    r.increment = n(0);
    r.strain_xx = d(1), r.strain_yy = d(2), r.strain_xy = d(3);
    r.stress_xx = d(4), r.stress_yy = d(5), r.stress_xy = d(6);
    r.n_clusters = n(7);
    r.lambda0 = d(8), r.mu0 = d(9);
    r.fractured = n(10) != 0;
    r.newton_iterations = n(11);
    r.sc_iterations = n(12);
    r.sc_unconverged = n(13) != 0;
    r.cuts = n(14);
    rows.push_back(r);
  }
  if (!header) throw InvalidInput(path.string() + ": missing column header");
  return rows;
}

std::filesystem::path field_path(const std::filesystem::path& dir, const std::string& name,
                                 int increment) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06d.bin", name.c_str(), increment);
  return dir / "fields" / buf;
}

void write_field(const std::filesystem::path& path, const FileTag& tag, const FieldDump& field) {
  auto out = open_out(path, true);
  std::ostringstream h;
  h << tag.line() << "\nfield " << field.name << "\nincrement " << field.increment << "\ndims";
  for (int d : field.dims) h << ' ' << d;
  h << "\ncount " << field.values.size() << "\nformat float64-le\nend\n";
  out << h.str();
  for (double v : field.values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

FieldDump read_field(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  FieldDump f;
  std::size_t count = 0;
  for (std::string line;;) {
    if (!std::getline(in, line)) throw InvalidInput(path.string() + ": truncated header");
    if (line == "end") break;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    std::string key;
    s >> key;
    if (key == "field") {
      s >> f.name;
    } else if (key == "increment") {
      s >> f.increment;
    } else if (key == "dims") {
      for (int d; s >> d;) f.dims.push_back(d);
    } else if (key == "count") {
      s >> count;
    } else if (key == "format") {
      std::string fmt;
      s >> fmt;
      if (fmt != "float64-le") throw InvalidInput(path.string() + ": unsupported format " + fmt);
    } else {
      throw InvalidInput(path.string() + ": unknown header key " + key);
    }
  }
  f.values.resize(count);
  for (auto& v : f.values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
      throw InvalidInput(path.string() + ": truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return f;
}

void write_labels(const std::filesystem::path& path, const FileTag& tag,
                  const std::vector<int>& dims, const std::vector<int>& labels) {
  auto out = open_out(path);
  out << tag.line() << "\n# dims";
  for (int d : dims) out << ' ' << d;
  out << "\n";
  const int row = dims.back();
  for (std::size_t v = 0; v < labels.size(); ++v)
    out << labels[v] << ((static_cast<int>(v) + 1) % row == 0 ? '\n' : ' ');
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<int> labels;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    for (int l; s >> l;) labels.push_back(l);
  }
  return labels;
}

void write_events(const std::filesystem::path& path, const FileTag& tag,
                  const std::vector<AdaptivityEvent>& events) {
  auto out = open_out(path);
  out << tag.line() << "\n";
  out << "increment,step,clusters_before,clusters_after,n_targets,cit_full,cit_symmetry,rewound,"
         "targets\n";
  for (const auto& e : events) {
    out << e.increment << ',' << e.step << ',' << e.clusters_before << ',' << e.clusters_after
        << ',' << e.targets.size() << ',' << e.cit_full << ',' << e.cit_symmetry << ','
        << int(e.rewound) << ',';
    // cluster:children:jump, space separated
    for (std::size_t i = 0; i < e.targets.size(); ++i) {
      if (i) out << ' ';
      const int children = i < e.child_counts.size() ? e.child_counts[i] : 0;
      out << e.targets[i].cluster << ':' << children << ':' << num(e.targets[i].max_jump);
    }
    out << '\n';
  }
}

}  // namespace crom::app
