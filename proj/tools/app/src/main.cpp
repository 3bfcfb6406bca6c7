#include "crom/app/compare.hpp"
#include "crom/app/config.hpp"
#include "crom/app/run.hpp"
#include "crom/app/rve.hpp"
#include "crom/cit.hpp"
#include "crom/parallel.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using namespace crom::app;

int threads_from_env() {
  const char* env = std::getenv("CROM_NUM_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096)
    throw std::invalid_argument(std::string("CROM_NUM_THREADS must be a positive integer, got '") +
                                env + "'");
  return static_cast<int>(n);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crom: clustering-based reduced order modelling of elastoplastic RVEs"};
  app.require_subcommand(1);

  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  auto* run_cmd = app.add_subcommand("run", "Run a configuration (sca, asca, oracle, cit-bench)");
  run_cmd->add_option("config", config_path, "Configuration file")->required();
  run_cmd->add_option("--seed", seed, "Override the configured seed");
  run_cmd->add_option("-o,--output", output, "Override the output directory");

  std::vector<std::string> dirs;
  std::string csv = "comparison.csv";
  auto* cmp_cmd = app.add_subcommand("compare", "Compare runs; the last directory is the reference");
  cmp_cmd->add_option("dirs", dirs, "Run directories")->required()->expected(2, 3);
  cmp_cmd->add_option("-o,--csv", csv, "CSV output path");

  std::string spec_path, rve_out;
  std::optional<std::uint64_t> gen_seed;
  auto* gen_cmd = app.add_subcommand("gen-rve", "Generate an RVE from an [rve] generator spec");
  gen_cmd->add_option("spec", spec_path, "Generator spec file")->required();
  gen_cmd->add_option("-o,--output", rve_out, "RVE file to write")->required();
  gen_cmd->add_option("--seed", gen_seed, "Override the placement seed");

  int n_init = 16, repeats = 3;
  double alpha = 0.75, beta = 0.25;
  std::vector<int> bench_dims{64, 64};
  std::uint64_t bench_seed = 0;
  auto* bench_cmd = app.add_subcommand("cit-bench", "Time standard versus incremental interaction tensor updates");
  bench_cmd->add_option("--n-init", n_init, "Clusters before the update")->required();
  bench_cmd->add_option("--alpha", alpha, "Retained fraction of clusters")->required();
  bench_cmd->add_option("--beta", beta, "Relative cluster growth")->required();
  bench_cmd->add_option("--dims", bench_dims, "Grid dimensions")->expected(2);
  bench_cmd->add_option("--repeats", repeats, "Timing repeats (best is kept)");
  bench_cmd->add_option("--seed", bench_seed, "Seed of the synthetic clustering");

  CLI11_PARSE(app, argc, argv);

  try {
    crom::set_num_threads(threads_from_env());

    if (*run_cmd) {
      const auto cfg = parse_config_file(config_path);
      RunOptions opts;
      opts.config_dir = fs::path(config_path).parent_path();
      opts.seed = seed;
      if (!output.empty()) opts.output = output;
      opts.log = &std::cerr;
      const auto summary = run(cfg, opts);
      std::cout << "status " << summary.status << "\n"
                << "output " << summary.output.string() << "\n";
      if (cfg.mode != Mode::cit_bench) {
        std::cout << "increments " << summary.increments << "\n"
                  << "toughness " << summary.toughness << "\n"
                  << "fracture_increment "
                  << (summary.fracture_increment ? std::to_string(*summary.fracture_increment) : "none")
                  << "\n"
                  << "clusters " << summary.final_clusters << "\n";
      }
      if (summary.status != "completed") {
        std::cerr << "error: " << summary.error << "\n";
        return 3;
      }
    } else if (*cmp_cmd) {
      std::vector<fs::path> paths(dirs.begin(), dirs.end());
      const auto report = compare_runs(paths);
      write_comparison_csv(csv, report.rows);
      std::cout << format_comparison(report);
    } else if (*gen_cmd) {
      auto spec = parse_generator_spec(read_text(spec_path));
      if (gen_seed) spec.seed = *gen_seed;
      const auto grid = generate_rve(spec);
      write_rve(rve_out, grid);
      std::cout << "wrote " << rve_out << " (" << grid.dims()[0] << "x" << grid.dims()[1]
                << ", particle fraction " << phase_fraction(grid, spec.particle_phase) << ")\n";
    } else if (*bench_cmd) {
      const crom::VoxelGrid grid(bench_dims, {1.0, 1.0},
                                 std::vector<int>(static_cast<std::size_t>(bench_dims[0]) *
                                                      static_cast<std::size_t>(bench_dims[1]),
                                                  0));
      const auto r = crom::benchmark_cit_update(grid, n_init, alpha, beta, bench_seed, repeats);
      std::cout << "n_init " << r.n_init << "  n_old " << r.n_old << "  n_new " << r.n_new << "\n"
                << "standard  full " << r.standard_full << "  symmetry " << r.standard_symmetry
                << "  seconds " << r.standard_seconds << "\n"
                << "proposed  full " << r.proposed_full << "  symmetry " << r.proposed_symmetry
                << "  seconds " << r.proposed_seconds << "\n"
                << "speedup " << (r.proposed_seconds > 0 ? r.standard_seconds / r.proposed_seconds : 0.0)
                << "\nmax_difference " << r.max_difference << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
