#include "crom/app/config.hpp"

#include "crom/error.hpp"
#include "crom/hash.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace crom::app {
namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

class Section {
 public:
  Section(std::string name, int line) : name_(std::move(name)), line_(line) {}

  const std::string& name() const { return name_; }
  int line() const { return line_; }

  void add(const std::string& key, const std::string& value, int line) {
    if (entries_.count(key))
      throw ConfigError("duplicate key '" + key + "' in [" + name_ + "]", line);
    entries_[key] = {value, line, false};
    order_.push_back(key);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const Entry* find(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  const Entry& need(const std::string& key) {
    const Entry* e = find(key);
    if (!e) throw ConfigError("missing key '" + key + "' in [" + name_ + "]", line_);
    return *e;
  }

  std::vector<std::string> keys() const { return order_; }

  void check_unused() const {
    for (const auto& key : order_) {
      const Entry& e = entries_.at(key);
      if (!e.used) throw ConfigError("unknown key '" + key + "' in [" + name_ + "]", e.line);
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    auto it = entries_.find(key);
    throw ConfigError(name_ + "." + key + ": " + message,
                      it != entries_.end() ? it->second.line : line_);
  }

 private:
  std::string name_;
  int line_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

template <typename T>
T parse_number(const std::string& text, const std::string& field, int line) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError(field + ": expected a number, got '" + text + "'", line);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(field + ": value must be finite", line);
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& field, int line) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(field + ": expected true or false, got '" + text + "'", line);
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

/// Typed accessors with range checks that report the key's line.
class Reader {
 public:
  explicit Reader(Section& s) : s_(s) {}

  template <typename T>
  bool number(const std::string& key, T& out, const std::function<bool(T)>& ok = {},
              const char* range = nullptr) {
    const Entry* e = s_.find(key);
    if (!e) return false;
    const T v = parse_number<T>(e->value, s_.name() + "." + key, e->line);
    if (ok && !ok(v)) s_.fail(key, std::string("value ") + e->value + " out of range, " + range);
    out = v;
    return true;
  }

  bool boolean(const std::string& key, bool& out) {
    const Entry* e = s_.find(key);
    if (!e) return false;
    out = parse_bool(e->value, s_.name() + "." + key, e->line);
    return true;
  }

  bool text(const std::string& key, std::string& out) {
    const Entry* e = s_.find(key);
    if (!e) return false;
    out = e->value;
    return true;
  }

  template <typename T>
  bool list(const std::string& key, std::vector<T>& out, std::size_t min_size = 0,
            std::size_t max_size = SIZE_MAX) {
    const Entry* e = s_.find(key);
    if (!e) return false;
    std::vector<T> v;
    for (const auto& tok : split_ws(e->value))
      v.push_back(parse_number<T>(tok, s_.name() + "." + key, e->line));
    if (v.size() < min_size || v.size() > max_size)
      s_.fail(key, "expected between " + std::to_string(min_size) + " and " +
                       std::to_string(max_size) + " values");
    out = std::move(v);
    return true;
  }

  Section& section() { return s_; }

 private:
  Section& s_;
};

template <typename T>
std::function<bool(T)> positive() {
  return [](T v) { return v > T(0); };
}
template <typename T>
std::function<bool(T)> at_least(T lo) {
  return [lo](T v) { return v >= lo; };
}
template <typename T>
std::function<bool(T)> between(T lo, T hi) {
  return [lo, hi](T v) { return v >= lo && v <= hi; };
}

struct Document {
  std::vector<Section> sections;

  Section* find(const std::string& name) {
    for (auto& s : sections)
      if (s.name() == name) return &s;
    return nullptr;
  }
};

Document tokenize(const std::string& text) {
  Document doc;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::set<std::string> seen;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header", line);
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (name.empty()) throw ConfigError("empty section name", line);
      if (!seen.insert(name).second) throw ConfigError("duplicate section [" + name + "]", line);
      doc.sections.emplace_back(name, line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    if (doc.sections.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", line);
    doc.sections.back().add(key, value, line);
  }
  return doc;
}

Mode parse_mode(const std::string& s, int line) {
  if (s == "sca") return Mode::sca;
  if (s == "asca") return Mode::asca;
  if (s == "oracle") return Mode::oracle;
  if (s == "cit-bench") return Mode::cit_bench;
  throw ConfigError("run.mode: unknown mode '" + s + "' (sca, asca, oracle, cit-bench)", line);
}

AdaptivityFeature parse_feature(const std::string& s, int line) {
  if (s == "acc_p") return AdaptivityFeature::acc_p;
  if (s == "plastic_work") return AdaptivityFeature::plastic_work;
  if (s == "h_norm") return AdaptivityFeature::h_norm;
  throw ConfigError("adaptivity.feature: unknown feature '" + s + "'", line);
}

std::string feature_name(AdaptivityFeature f) {
  switch (f) {
    case AdaptivityFeature::acc_p: return "acc_p";
    case AdaptivityFeature::plastic_work: return "plastic_work";
    case AdaptivityFeature::h_norm: return "h_norm";
  }
  return "acc_p";
}

int parse_label(const std::string& text, const std::string& what, int line) {
  return parse_number<int>(text, what, line);
}

void read_generator(Reader& r, GeneratorSpec& g) {
  Section& s = r.section();
  const Entry& kind = s.need("generator");
  if (kind.value == "two_particle")
    g.kind = GeneratorKind::two_particle;
  else if (kind.value == "multi_particle")
    g.kind = GeneratorKind::multi_particle;
  else
    throw ConfigError("rve.generator: unknown generator '" + kind.value + "'", kind.line);
  if (r.list("dims", g.dims, 2, 2) &&
      std::any_of(g.dims.begin(), g.dims.end(), [](int d) { return d < 2; }))
    s.fail("dims", "every dimension must be at least 2");
  if (r.list("lengths", g.lengths, 2, 2) &&
      std::any_of(g.lengths.begin(), g.lengths.end(), [](double l) { return l <= 0.0; }))
    s.fail("lengths", "lengths must be positive");
  r.number<double>("volume_fraction", g.volume_fraction, between(1e-6, 0.6), "expected (0, 0.6]");
  r.number<double>("radius", g.radius, at_least(0.0), "expected >= 0");
  r.number<double>("gap_fraction", g.gap_fraction, between(0.0, 1.0), "expected [0, 1]");
  r.number<std::uint64_t>("seed", g.seed);
  r.number<int>("matrix_phase", g.matrix_phase);
  r.number<int>("particle_phase", g.particle_phase);
  if (g.matrix_phase == g.particle_phase)
    s.fail("particle_phase", "must differ from matrix_phase");
}

void write_generator(std::ostream& out, const GeneratorSpec& g) {
  out << "generator = "
      << (g.kind == GeneratorKind::two_particle ? "two_particle" : "multi_particle") << "\n";
  out << "dims = " << g.dims[0] << " " << g.dims[1] << "\n";
  out << "lengths = " << format_double(g.lengths[0]) << " " << format_double(g.lengths[1]) << "\n";
  out << "volume_fraction = " << format_double(g.volume_fraction) << "\n";
  out << "radius = " << format_double(g.radius) << "\n";
  out << "gap_fraction = " << format_double(g.gap_fraction) << "\n";
  out << "seed = " << g.seed << "\n";
  out << "matrix_phase = " << g.matrix_phase << "\n";
  out << "particle_phase = " << g.particle_phase << "\n";
}

void read_rve(Section& s, RveSource& rve) {
  Reader r(s);
  std::string file;
  if (r.text("file", file)) {
    if (s.has("generator")) s.fail("generator", "cannot be combined with rve.file");
    rve.file = file;
    return;
  }
  GeneratorSpec g;
  read_generator(r, g);
  rve.generator = g;
}

void read_material(Section& s, int label, MaterialTable& table) {
  Reader r(s);
  PhaseMaterial m;
  const Entry& kind = s.need("kind");
  if (kind.value == "elastic")
    m.kind = MaterialKind::elastic;
  else if (kind.value == "von_mises")
    m.kind = MaterialKind::von_mises;
  else
    throw ConfigError(s.name() + ".kind: unknown material '" + kind.value + "'", kind.line);
  s.need("young");
  s.need("poisson");
  r.number<double>("young", m.young, positive<double>(), "expected > 0");
  r.number<double>("poisson", m.poisson, [](double v) { return v > -1.0 && v < 0.5; },
                   "expected (-1, 0.5)");
  if (m.kind == MaterialKind::von_mises) {
    s.need("sigma_y0");
    r.number<double>("sigma_y0", m.hardening.sigma_y0, positive<double>(), "expected > 0");
    r.number<double>("hardening_coefficient", m.hardening.coefficient, at_least(0.0),
                     "expected >= 0");
    r.number<double>("hardening_exponent", m.hardening.exponent,
                     [](double v) { return v > 0.0 && v <= 1.0; }, "expected (0, 1]");
  }
  table[label] = m;
}

void read_loading(Section& s, LoadingSpec& l) {
  Reader r(s);
  if (const Entry* e = s.find("control")) {
    const auto toks = split_ws(e->value);
    if (toks.size() != 3) s.fail("control", "expected three entries (xx yy xy)");
    for (int i = 0; i < 3; ++i) {
      if (toks[i] == "strain")
        l.control[i] = Control::strain;
      else if (toks[i] == "stress")
        l.control[i] = Control::stress;
      else
        s.fail("control", "entries must be strain or stress, got '" + toks[i] + "'");
    }
  }
  std::vector<double> total;
  if (r.list("total", total, 3, 3)) l.total = Vec3(total[0], total[1], total[2]);
  r.number<int>("increments", l.increments, at_least(1), "expected >= 1");
}

void write_loading(std::ostream& out, const LoadingSpec& l) {
  out << "control =";
  for (auto c : l.control) out << (c == Control::strain ? " strain" : " stress");
  out << "\n";
  out << "total = " << format_double(l.total(0)) << " " << format_double(l.total(1)) << " "
      << format_double(l.total(2)) << "\n";
  out << "increments = " << l.increments << "\n";
}

void read_reference(Reader& r, std::optional<ReferenceMaterial>& out) {
  Section& s = r.section();
  const bool has_l = s.has("reference_lambda"), has_m = s.has("reference_mu");
  if (has_l != has_m)
    s.fail(has_l ? "reference_lambda" : "reference_mu",
           "reference_lambda and reference_mu must be given together");
  if (!has_l) return;
  double lambda = 0.0, mu = 0.0;
  r.number<double>("reference_lambda", lambda);
  r.number<double>("reference_mu", mu, positive<double>(), "expected > 0");
  const ReferenceMaterial ref{lambda, mu};
  if (!ref.valid()) s.fail("reference_lambda", "reference material is degenerate");
  out = ref;
}

void read_solver(Section& s, SolverConfig& c) {
  Reader r(s);
  r.number<double>("newton_tol", c.newton_tol, positive<double>(), "expected > 0");
  r.number<int>("newton_max_iter", c.newton_max_iter, at_least(1), "expected >= 1");
  r.number<double>("sc_tol", c.sc_tol, positive<double>(), "expected > 0");
  r.number<int>("sc_max_iter", c.sc_max_iter, at_least(1), "expected >= 1");
  r.boolean("self_consistent", c.self_consistent);
  r.number<int>("max_cuts", c.max_cuts, at_least(0), "expected >= 0");
  std::string rule = "voigt";
  if (r.text("reference", rule)) {
    if (rule == "voigt")
      c.initial_reference = ReferenceRule::voigt;
    else if (rule == "fixed")
      c.initial_reference = ReferenceRule::fixed;
    else
      s.fail("reference", "expected voigt or fixed");
  }
  std::optional<ReferenceMaterial> ref;
  read_reference(r, ref);
  if (c.initial_reference == ReferenceRule::fixed) {
    if (!ref) s.fail("reference", "fixed reference needs reference_lambda and reference_mu");
    c.fixed_reference = *ref;
  } else if (ref) {
    s.fail("reference_lambda", "only allowed with reference = fixed");
  }
}

void write_solver(std::ostream& out, const SolverConfig& c) {
  out << "newton_tol = " << format_double(c.newton_tol) << "\n";
  out << "newton_max_iter = " << c.newton_max_iter << "\n";
  out << "sc_tol = " << format_double(c.sc_tol) << "\n";
  out << "sc_max_iter = " << c.sc_max_iter << "\n";
  out << "self_consistent = " << (c.self_consistent ? "true" : "false") << "\n";
  out << "max_cuts = " << c.max_cuts << "\n";
  if (c.initial_reference == ReferenceRule::fixed) {
    out << "reference = fixed\n";
    out << "reference_lambda = " << format_double(c.fixed_reference.lambda) << "\n";
    out << "reference_mu = " << format_double(c.fixed_reference.mu) << "\n";
  } else {
    out << "reference = voigt\n";
  }
}

void read_adaptivity(Section& s, AdaptivityConfig& c) {
  Reader r(s);
  if (const Entry* e = s.find("feature")) c.feature = parse_feature(e->value, e->line);
  r.number<double>("trigger_ratio", c.trigger_ratio, between(0.0, 1.0), "expected [0, 1]");
  r.number<double>("child_volume_fraction", c.child_volume_fraction,
                   [](double v) { return v > 0.0 && v <= 1.0; }, "expected (0, 1]");
  r.number<double>("split_factor", c.split_factor, between(0.0, 1.0), "expected [0, 1]");
  r.number<double>("split_amplitude", c.split_amplitude, between(0.0, 1.0), "expected [0, 1]");
  r.number<double>("magnitude_exponent", c.magnitude_exponent, positive<double>(),
                   "expected > 0");
  r.number<double>("theta_low", c.theta_low, between(0.0, 1.0), "expected [0, 1]");
  r.number<int>("frequency", c.frequency, at_least(1), "expected >= 1");
  r.number<int>("max_consecutive_steps", c.max_consecutive_steps, at_least(1), "expected >= 1");
  r.number<int>("cluster_budget", c.cluster_budget, at_least(1), "expected >= 1");
  r.number<double>("min_feature_value", c.min_feature_value, at_least(0.0), "expected >= 0");
  r.number<int>("max_level", c.max_level, at_least(0), "expected >= 0");
  r.number<int>("max_level_gap", c.max_level_gap, at_least(0), "expected >= 0");
  r.number<int>("min_voxels_per_cluster", c.min_voxels_per_cluster, at_least(1),
                "expected >= 1");
  r.number<int>("scan_frequency", c.scan_frequency, at_least(1), "expected >= 1");
  r.boolean("repeat_increment", c.repeat_increment);
  r.number<int>("kmeans_n_init", c.kmeans_n_init, at_least(1), "expected >= 1");
  r.boolean("rewind", c.rewind);
  r.number<int>("max_rewinds", c.max_rewinds, at_least(0), "expected >= 0");
  s.need("phases");
  std::vector<int> phases;
  r.list("phases", phases, 1);
  c.adaptive_phases = std::set<int>(phases.begin(), phases.end());
}

void write_adaptivity(std::ostream& out, const AdaptivityConfig& c) {
  out << "feature = " << feature_name(c.feature) << "\n";
  out << "phases =";
  for (int p : c.adaptive_phases) out << " " << p;
  out << "\n";
  out << "trigger_ratio = " << format_double(c.trigger_ratio) << "\n";
  out << "child_volume_fraction = " << format_double(c.child_volume_fraction) << "\n";
  out << "split_factor = " << format_double(c.split_factor) << "\n";
  out << "split_amplitude = " << format_double(c.split_amplitude) << "\n";
  out << "magnitude_exponent = " << format_double(c.magnitude_exponent) << "\n";
  out << "theta_low = " << format_double(c.theta_low) << "\n";
  out << "frequency = " << c.frequency << "\n";
  out << "max_consecutive_steps = " << c.max_consecutive_steps << "\n";
  out << "cluster_budget = " << c.cluster_budget << "\n";
  out << "min_feature_value = " << format_double(c.min_feature_value) << "\n";
  out << "max_level = " << c.max_level << "\n";
  out << "max_level_gap = " << c.max_level_gap << "\n";
  out << "min_voxels_per_cluster = " << c.min_voxels_per_cluster << "\n";
  out << "scan_frequency = " << c.scan_frequency << "\n";
  out << "repeat_increment = " << (c.repeat_increment ? "true" : "false") << "\n";
  out << "kmeans_n_init = " << c.kmeans_n_init << "\n";
  out << "rewind = " << (c.rewind ? "true" : "false") << "\n";
  out << "max_rewinds = " << c.max_rewinds << "\n";
}

void read_fracture(Section& s, FractureCriterion& f) {
  Reader r(s);
  r.number<int>("phase", f.phase);
  r.number<double>("volume_fraction", f.volume_fraction_threshold,
                   [](double v) { return v > 0.0 && v <= 1.0; }, "expected (0, 1]");
  r.number<double>("acc_p", f.acc_p_threshold, positive<double>(), "expected > 0");
}

void read_oracle(Section& s, OracleConfig& c) {
  Reader r(s);
  r.number<double>("tol", c.tol, positive<double>(), "expected > 0");
  r.number<int>("max_iter", c.max_iter, at_least(1), "expected >= 1");
  r.number<int>("max_cuts", c.max_cuts, at_least(0), "expected >= 0");
  read_reference(r, c.reference);
}

void read_bench(Section& s, CitBenchSpec& b) {
  Reader r(s);
  if (r.list("dims", b.dims, 2, 2) &&
      std::any_of(b.dims.begin(), b.dims.end(), [](int d) { return d < 2; }))
    s.fail("dims", "every dimension must be at least 2");
  r.number<int>("n_init", b.n_init, at_least(1), "expected >= 1");
  r.number<double>("alpha", b.alpha, between(0.0, 1.0), "expected [0, 1]");
  r.number<double>("beta", b.beta, at_least(0.0), "expected >= 0");
  r.number<int>("repeats", b.repeats, at_least(1), "expected >= 1");
}

void check_consistency(RunConfig& c, Document& doc) {
  const int run_line = doc.find("run") ? doc.find("run")->line() : 0;
  if (c.mode == Mode::cit_bench) return;
  if (!c.rve.file && !c.rve.generator) throw ConfigError("missing section [rve]", 0);
  if (c.materials.empty()) throw ConfigError("no [material.<phase>] section", 0);
  if (c.mode == Mode::sca || c.mode == Mode::asca) {
    if (c.clusters.empty()) throw ConfigError("missing section [clusters]", 0);
    for (const auto& [phase, _] : c.clusters)
      if (!c.materials.count(phase))
        throw ConfigError("clusters given for phase " + std::to_string(phase) +
                              " without a material",
                          doc.find("clusters")->line());
  }
  if (c.mode == Mode::asca && !c.adaptivity)
    throw ConfigError("mode asca needs an [adaptivity] section", run_line);
  if (c.mode != Mode::asca && c.adaptivity)
    throw ConfigError("[adaptivity] is only valid with mode asca", doc.find("adaptivity")->line());
  if (c.mode == Mode::oracle) {
    for (auto ctl : c.loading.control)
      if (ctl != Control::strain)
        throw ConfigError("mode oracle supports strain control only",
                          doc.find("loading") ? doc.find("loading")->line() : run_line);
  }
  if (c.rve.generator) {
    const auto& g = *c.rve.generator;
    for (int phase : {g.matrix_phase, g.particle_phase})
      if (!c.materials.count(phase))
        throw ConfigError("no material for phase " + std::to_string(phase), doc.find("rve")->line());
  }
}

}  // namespace

std::vector<int> RunConfig::checkpoint_increments() const {
  std::set<int> out(checkpoints.begin(), checkpoints.end());
  if (checkpoint_every > 0)
    for (int m = checkpoint_every; m <= loading.increments; m += checkpoint_every) out.insert(m);
  out.insert(loading.increments);
  std::vector<int> v;
  for (int m : out)
    if (m >= 1 && m <= loading.increments) v.push_back(m);
  return v;
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::sca: return "sca";
    case Mode::asca: return "asca";
    case Mode::oracle: return "oracle";
    case Mode::cit_bench: return "cit-bench";
  }
  return "sca";
}

RunConfig parse_config(const std::string& text) {
  Document doc = tokenize(text);
  RunConfig c;
  Section* run = doc.find("run");
  if (!run) throw ConfigError("missing section [run]", 0);
  {
    Reader r(*run);
    const Entry& mode = run->need("mode");
    c.mode = parse_mode(mode.value, mode.line);
    r.number<std::uint64_t>("seed", c.seed);
    r.text("output", c.output);
    if (r.list("checkpoints", c.checkpoints) &&
        std::any_of(c.checkpoints.begin(), c.checkpoints.end(), [](int m) { return m < 1; }))
      run->fail("checkpoints", "increments are numbered from 1");
    r.number<int>("checkpoint_every", c.checkpoint_every, at_least(0), "expected >= 0");
    r.number<int>("kmeans_n_init", c.kmeans_n_init, at_least(1), "expected >= 1");
  }
  for (auto& s : doc.sections) {
    const std::string& name = s.name();
    if (name == "run") {
    } else if (name == "rve") {
      read_rve(s, c.rve);
    } else if (name.rfind("material.", 0) == 0) {
      read_material(s, parse_label(name.substr(9), "material phase label", s.line()), c.materials);
    } else if (name == "clusters") {
      for (const auto& key : s.keys()) {
        const Entry& e = s.need(key);
        const int phase = parse_label(key, "clusters phase label", e.line);
        const int k = parse_number<int>(e.value, "clusters." + key, e.line);
        if (k < 1) s.fail(key, "cluster count must be at least 1");
        c.clusters[phase] = k;
      }
    } else if (name == "loading") {
      read_loading(s, c.loading);
    } else if (name == "solver") {
      read_solver(s, c.solver);
    } else if (name == "adaptivity") {
      AdaptivityConfig a;
      read_adaptivity(s, a);
      c.adaptivity = a;
    } else if (name == "fracture") {
      read_fracture(s, c.fracture);
    } else if (name == "oracle") {
      read_oracle(s, c.oracle);
    } else if (name == "cit_bench") {
      read_bench(s, c.bench);
    } else {
      throw ConfigError("unknown section [" + name + "]", s.line());
    }
    s.check_unused();
  }
  check_consistency(c, doc);
  return c;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what(), e.line());
  }
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "mode = " << mode_name(c.mode) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "output = " << c.output << "\n";
  if (!c.checkpoints.empty()) {
    out << "checkpoints =";
    for (int m : c.checkpoints) out << " " << m;
    out << "\n";
  }
  out << "checkpoint_every = " << c.checkpoint_every << "\n";
  out << "kmeans_n_init = " << c.kmeans_n_init << "\n";

  if (c.rve.file) {
    out << "\n[rve]\nfile = " << *c.rve.file << "\n";
  } else if (c.rve.generator) {
    out << "\n[rve]\n";
    write_generator(out, *c.rve.generator);
  }

  for (const auto& [label, m] : c.materials) {
    out << "\n[material." << label << "]\n";
    out << "kind = " << (m.kind == MaterialKind::elastic ? "elastic" : "von_mises") << "\n";
    out << "young = " << format_double(m.young) << "\n";
    out << "poisson = " << format_double(m.poisson) << "\n";
    if (m.kind == MaterialKind::von_mises) {
      out << "sigma_y0 = " << format_double(m.hardening.sigma_y0) << "\n";
      out << "hardening_coefficient = " << format_double(m.hardening.coefficient) << "\n";
      out << "hardening_exponent = " << format_double(m.hardening.exponent) << "\n";
    }
  }

  if (!c.clusters.empty()) {
    out << "\n[clusters]\n";
    for (const auto& [phase, k] : c.clusters) out << phase << " = " << k << "\n";
  }

  out << "\n[loading]\n";
  write_loading(out, c.loading);
  out << "\n[solver]\n";
  write_solver(out, c.solver);
  if (c.adaptivity) {
    out << "\n[adaptivity]\n";
    write_adaptivity(out, *c.adaptivity);
  }
  out << "\n[fracture]\n";
  out << "phase = " << c.fracture.phase << "\n";
  out << "volume_fraction = " << format_double(c.fracture.volume_fraction_threshold) << "\n";
  out << "acc_p = " << format_double(c.fracture.acc_p_threshold) << "\n";

  out << "\n[oracle]\n";
  out << "tol = " << format_double(c.oracle.tol) << "\n";
  out << "max_iter = " << c.oracle.max_iter << "\n";
  out << "max_cuts = " << c.oracle.max_cuts << "\n";
  if (c.oracle.reference) {
    out << "reference_lambda = " << format_double(c.oracle.reference->lambda) << "\n";
    out << "reference_mu = " << format_double(c.oracle.reference->mu) << "\n";
  }

  out << "\n[cit_bench]\n";
  out << "dims = " << c.bench.dims[0] << " " << c.bench.dims[1] << "\n";
  out << "n_init = " << c.bench.n_init << "\n";
  out << "alpha = " << format_double(c.bench.alpha) << "\n";
  out << "beta = " << format_double(c.bench.beta) << "\n";
  out << "repeats = " << c.bench.repeats << "\n";
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  RunConfig c = config;
  c.output.clear();
  Fnv1a h;
  h.add(std::string_view(serialize_config(c)));
  return h.value();
}

GeneratorSpec parse_generator_spec(const std::string& text) {
  Document doc = tokenize(text);
  Section* rve = doc.find("rve");
  if (!rve) throw ConfigError("missing section [rve]", 0);
  for (auto& s : doc.sections)
    if (s.name() != "rve") throw ConfigError("unexpected section [" + s.name() + "]", s.line());
  Reader r(*rve);
  GeneratorSpec g;
  read_generator(r, g);
  rve->check_unused();
  return g;
}

std::string serialize_generator_spec(const GeneratorSpec& spec) {
  std::ostringstream out;
  out << "[rve]\n";
  write_generator(out, spec);
  return out.str();
}

}  // namespace crom::app
