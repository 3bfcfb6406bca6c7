#pragma once

// Run configuration: a strict INI-style text format.
//
//   [section]
//   key = value    # comment
//
// Unknown sections or keys, missing required entries and out-of-range
// values are reported with the offending line number.

#include "crom/adaptivity.hpp"
#include "crom/materials.hpp"
#include "crom/oracle.hpp"
#include "crom/solver.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crom::app {

/// Configuration error carrying the line it refers to (0 when global).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Mode { sca, asca, oracle, cit_bench };

enum class GeneratorKind { two_particle, multi_particle };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::two_particle;
  std::vector<int> dims{80, 80};
  std::vector<double> lengths{1.0, 1.0};
  /// Target particle volume fraction.
  double volume_fraction = 0.15;
  /// Particle radius in voxels; derived from the volume fraction when 0.
  double radius = 0.0;
  /// two_particle: surface gap between the particles as a fraction of the domain length.
  double gap_fraction = 0.25;
  /// multi_particle: RNG seed for the particle placement.
  std::uint64_t seed = 1;
  int matrix_phase = 0;
  int particle_phase = 1;

  bool operator==(const GeneratorSpec&) const = default;
};

struct RveSource {
  std::optional<std::string> file;
  std::optional<GeneratorSpec> generator;

  bool operator==(const RveSource&) const = default;
};

struct LoadingSpec {
  std::array<Control, 3> control{Control::strain, Control::strain, Control::strain};
  /// Tensor components (xx, yy, xy) of the total prescribed strain or stress.
  Vec3 total = Vec3(5e-2, 0.0, 0.0);
  int increments = 100;

  LoadingPath path() const {
    return LoadingPath::proportional(control, mandel(total(0), total(1), total(2)), increments);
  }
  bool operator==(const LoadingSpec&) const = default;
};

struct CitBenchSpec {
  std::vector<int> dims{64, 64};
  int n_init = 16;
  double alpha = 0.75;
  double beta = 0.25;
  int repeats = 3;

  bool operator==(const CitBenchSpec&) const = default;
};

struct RunConfig {
  Mode mode = Mode::sca;
  std::uint64_t seed = 0;
  std::string output = "out";
  std::vector<int> checkpoints;
  int checkpoint_every = 0;
  RveSource rve;
  MaterialTable materials;
  std::map<int, int> clusters;
  int kmeans_n_init = 10;
  LoadingSpec loading;
  SolverConfig solver;
  std::optional<AdaptivityConfig> adaptivity;
  FractureCriterion fracture;
  OracleConfig oracle;
  CitBenchSpec bench;

  /// Increments at which fields are written (always including the last).
  std::vector<int> checkpoint_increments() const;

  bool operator==(const RunConfig&) const = default;
};


RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// FNV-1a hash of the canonical text form, ignoring the output directory.
std::uint64_t config_hash(const RunConfig& config);

/// Only the [rve] section; used by the gen-rve command.
GeneratorSpec parse_generator_spec(const std::string& text);
std::string serialize_generator_spec(const GeneratorSpec& spec);

std::string mode_name(Mode mode);

}  // namespace crom::app
