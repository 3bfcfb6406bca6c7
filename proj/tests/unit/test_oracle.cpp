#include "doctest.h"
#include "support.hpp"

#include "crom/cit.hpp"
#include "crom/error.hpp"
#include "crom/oracle.hpp"
#include "crom/rng.hpp"
#include "crom/solver.hpp"

using namespace crom;

TEST_CASE("homogeneous material") {
  const VoxelGrid grid({6, 5}, {1.0, 1.0}, std::vector<int>(30, 0));
  const MaterialTable mats{{0, PhaseMaterial::von_mises(100.0, 0.3, 0.5, 0.2, 0.4)}};
  const auto path = LoadingPath::proportional({Control::strain, Control::strain, Control::strain},
                                              mandel(2e-2, -5e-3, 4e-3), 4);
  const auto sol = solve_full_field(grid, mats, path);
  ClusterState single;
  for (const auto& inc : path.increments) single = state_update(mats.at(0), single, inc.value).state;
  for (const auto& s : sol.states) {
    CHECK(test::max_abs_diff(s.strain, single.strain) < 1e-14);
    CHECK(test::max_abs_diff(s.stress, single.stress) < 1e-12);
    CHECK(s.acc_p == doctest::Approx(single.acc_p).epsilon(1e-12));
  }
  REQUIRE(sol.history.size() == 5);
  CHECK(sol.history[0].strain.isZero(0.0));
  CHECK(test::max_abs_diff(sol.history[4].strain, mandel(2e-2, -5e-3, 4e-3)) < 1e-15);
}

TEST_CASE("elastic laminate") {
  // Layers normal to axis 0: strain_xx varies layer by layer, stress_xx is uniform.
  const auto grid = test::two_phase_grid(8, 8, [](int i, int) { return i < 3; });
  const MaterialTable mats{{0, PhaseMaterial::elastic(10.0, 0.3)}, {1, PhaseMaterial::elastic(1.0, 0.2)}};
  OracleConfig cfg;
  cfg.tol = 1e-13;
  const double E = 1e-3;
  const auto path = LoadingPath::proportional({Control::strain, Control::strain, Control::strain},
                                              Vec3(E, 0.0, 0.0), 1);
  const auto sol = solve_full_field(grid, mats, path, cfg);

  const double M0 = mats.at(0).lame_lambda() + 2.0 * mats.at(0).shear_modulus();
  const double M1 = mats.at(1).lame_lambda() + 2.0 * mats.at(1).shear_modulus();
  const double f1 = 3.0 / 8.0, f0 = 1.0 - f1;
  const double sxx = E / (f0 / M0 + f1 / M1);
  for (int v = 0; v < grid.size(); ++v) {
    const double M = grid.label(v) == 1 ? M1 : M0;
    const auto& s = sol.states[static_cast<std::size_t>(v)];
    CHECK(test::rel_diff(s.strain(0), sxx / M) < 1e-8);
    CHECK(std::abs(s.strain(1)) < 1e-8 * E);
    CHECK(std::abs(s.strain(2)) < 1e-8 * E);
    CHECK(test::rel_diff(s.stress(0), sxx) < 1e-8);
  }
  CHECK(sol.history[1].stress(0) == doctest::Approx(sxx).epsilon(1e-8));
}

TEST_CASE("one voxel per cluster reproduces the full field") {
  const auto grid = test::two_phase_grid(8, 8, [](int i, int j) { return (i - 3) * (i - 3) + (j - 4) * (j - 4) <= 5; });
  const MaterialTable mats{{0, PhaseMaterial::elastic(100.0, 0.3)}, {1, PhaseMaterial::elastic(1.0, 0.19)}};
  const auto ref = ReferenceMaterial::make(30.0, 20.0);
  OracleConfig ocfg;
  ocfg.reference = ref;
  ocfg.tol = 1e-12;
  const Vec3 macro = mandel(1e-3, 2e-4, -3e-4);
  const auto green = assemble_green_operator(ref, FrequencyGrid(grid));
  const std::vector<ClusterState> zero(64);
  const auto full = solve_full_field_increment(grid, mats, green, zero, macro, ocfg);

  ClusterMap map(64);
  for (int v = 0; v < 64; ++v) map.add_cluster(grid.label(v), {v});
  const auto cit = assemble_matrix(map, green);
  MacroIncrement load;
  load.value = macro;
  SolverConfig scfg;
  scfg.newton_tol = 1e-14;
  const auto reduced = newton_solve_increment(map, mats, cit.tensors(ref), ref, zero, load, scfg);
  REQUIRE(reduced.converged);
  double worst = 0.0;
  for (int v = 0; v < 64; ++v)
    worst = std::max(worst, (reduced.states[static_cast<std::size_t>(v)].strain - full[static_cast<std::size_t>(v)].strain).norm() /
                                full[static_cast<std::size_t>(v)].strain.norm());
  CHECK(worst < 1e-6);
}

TEST_CASE("strain concentration features") {
  SUBCASE("homogeneous grid gives the identity") {
    const VoxelGrid grid({4, 4}, {1.0, 1.0}, std::vector<int>(16, 0));
    const MaterialTable mats{{0, PhaseMaterial::von_mises(10.0, 0.3, 1.0, 0.0, 1.0)}};
    const auto f = strain_concentration_features(grid, mats);
    CHECK(f.dim == 9);
    CHECK(f.rows() == 16);
    for (int v = 0; v < 16; ++v)
      for (int k = 0; k < 9; ++k) CHECK(f.row(v)[static_cast<std::size_t>(k)] == doctest::Approx(k % 4 == 0 ? 1.0 : 0.0));
  }

  SUBCASE("volume average is the identity") {
    const auto grid = test::two_phase_grid(8, 8, [](int i, int j) { return i + j < 5; });
    const MaterialTable mats{{0, PhaseMaterial::elastic(10.0, 0.3)}, {1, PhaseMaterial::elastic(1.0, 0.2)}};
    const auto f = strain_concentration_features(grid, mats);
    for (int k = 0; k < 9; ++k) {
      double mean = 0.0;
      for (int v = 0; v < 64; ++v) mean += f.row(v)[static_cast<std::size_t>(k)] / 64.0;
      CHECK(mean == doctest::Approx(k % 4 == 0 ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("stress-driven loading is rejected") {
  const VoxelGrid grid({2, 2}, {1.0, 1.0}, {0, 0, 0, 0});
  const MaterialTable mats{{0, PhaseMaterial::elastic(1.0, 0.2)}};
  const auto path = LoadingPath::proportional({Control::strain, Control::stress, Control::strain}, Vec3(1e-3, 0, 0), 1);
  CHECK_THROWS_AS(solve_full_field(grid, mats, path), InvalidInput);
}

TEST_CASE("error metrics") {
  CHECK(relative_error(2.0, 2.0) == 0.0);
  CHECK(relative_error(1.1, 1.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(relative_error(1.0, 0.0), InvalidInput);

  const std::vector<double> a{1.0, 2.0, 3.0}, b{1.5, 2.5, 3.5};
  CHECK(rmse_field(a, a) == 0.0);
  CHECK(rmse_field(b, a) == doctest::Approx(0.5));

  Rng rng(6);
  std::vector<double> x(37), y(37);
  for (auto& v : x) v = rng.uniform();
  for (auto& v : y) v = rng.uniform();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (i == j) sum += (x[i] - y[j]) * (x[i] - y[j]);
  CHECK(std::abs(rmse_field(x, y) - std::sqrt(sum / 37.0)) < 1e-14);
  CHECK_THROWS_AS(rmse_field(a, std::vector<double>{1.0}), InvalidInput);
}
