#include "doctest.h"
#include "support.hpp"

#include "crom/cit.hpp"
#include "crom/clustering.hpp"
#include "crom/error.hpp"
#include "crom/rng.hpp"
#include "crom/solver.hpp"

using namespace crom;

namespace {

Vec3 random_vec(Rng& rng, double scale) {
  return scale * Vec3(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
}

Mat3 random_mat(Rng& rng, double scale) {
  Mat3 m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m(a, b) = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

// Strain increment whose volumetric and deviatoric parts are both at least
// half of `scale` in magnitude.
Vec3 nondegenerate_increment(Rng& rng, double scale) {
  auto magnitude = [&] { return (rng.uniform() < 0.5 ? -1.0 : 1.0) * scale * (0.5 + 0.5 * rng.uniform()); };
  const Vec3 vol = Vec3(1.0, 1.0, 0.0) / std::sqrt(2.0);
  const double angle = 2.0 * 3.141592653589793 * rng.uniform();
  const Vec3 dev = std::cos(angle) * Vec3(1.0, -1.0, 0.0) / std::sqrt(2.0) + std::sin(angle) * Vec3(0.0, 0.0, 1.0);
  return magnitude() * vol + magnitude() * dev;
}

// Map with one cluster per group of voxel ids, all of phase `phase`.
ClusterMap map_of(int voxels, const std::vector<std::vector<int>>& groups,
                  const std::vector<int>& phases) {
  ClusterMap map(voxels);
  for (std::size_t g = 0; g < groups.size(); ++g) map.add_cluster(phases[g], groups[g]);
  return map;
}

// Map from a grid: one cluster per phase.
ClusterMap phase_map(const VoxelGrid& grid) {
  ClusterMap map(grid.size());
  for (int p : grid.phases()) {
    std::vector<int> v;
    for (int i = 0; i < grid.size(); ++i)
      if (grid.label(i) == p) v.push_back(i);
    map.add_cluster(p, v);
  }
  return map;
}

}  // namespace

TEST_CASE("loading path") {
  const std::array<Control, 3> ctl{Control::strain, Control::stress, Control::stress};
  const auto path = LoadingPath::proportional(ctl, Vec3(0.05, 0.0, 0.0), 200);
  REQUIRE(path.increments.size() == 200);
  Vec3 sum = Vec3::Zero();
  for (const auto& inc : path.increments) sum += inc.value;
  CHECK(sum(0) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(path.increments[0].control == ctl);
  CHECK_THROWS_AS(LoadingPath::proportional(ctl, Vec3::Zero(), 0), InvalidInput);
}

TEST_CASE("residual of the reduced system") {
  const auto ref = ReferenceMaterial::make(1.5, 0.7);
  MacroIncrement load;

  SUBCASE("zero loading and zero state") {
    const std::vector<Vec3> z(2, Vec3::Zero());
    const std::vector<Mat3> T(4, Mat3::Identity());
    const std::vector<double> f{0.4, 0.6};
    CHECK(assemble_residual(z, z, Vec3::Zero(), T, f, ref, load).isZero(0.0));
  }

  SUBCASE("single cluster without interaction") {
    const std::vector<Vec3> de{Vec3(1, 2, 3)}, ds{Vec3(4, 5, 6)};
    const std::vector<Mat3> T{Mat3::Zero()};
    const std::vector<double> f{1.0};
    load.value = Vec3(0.5, 0.5, 0.5);
    const auto r = assemble_residual(de, ds, Vec3(0.1, 0.2, 0.3), T, f, ref, load);
    CHECK(test::max_abs_diff(Vec3(r.head<3>()), Vec3(0.9, 1.8, 2.7)) < 1e-15);
    CHECK(test::max_abs_diff(Vec3(r.tail<3>()), Vec3(0.5, 1.5, 2.5)) < 1e-15);
  }

  SUBCASE("two clusters against a component-wise evaluation") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
      const std::vector<Vec3> de{random_vec(rng, 1.0), random_vec(rng, 1.0)};
      const std::vector<Vec3> ds{random_vec(rng, 1.0), random_vec(rng, 1.0)};
      const std::vector<Mat3> T{random_mat(rng, 1.0), random_mat(rng, 1.0), random_mat(rng, 1.0),
                                random_mat(rng, 1.0)};
      const std::vector<double> f{0.3, 0.7};
      const Vec3 far = random_vec(rng, 1.0);
      MacroIncrement mixed;
      mixed.control = {Control::strain, Control::stress, Control::strain};
      mixed.value = random_vec(rng, 1.0);
      const auto r = assemble_residual(de, ds, far, T, f, ref, mixed);

      const double l = ref.lambda, m = ref.mu;
      const double D[3][3] = {{l + 2 * m, l, 0}, {l, l + 2 * m, 0}, {0, 0, 2 * m}};
      double expected[9];
      for (int i = 0; i < 2; ++i)
        for (int a = 0; a < 3; ++a) {
          double v = de[static_cast<std::size_t>(i)](a) - far(a);
          for (int j = 0; j < 2; ++j)
            for (int b = 0; b < 3; ++b) {
              double pol = ds[static_cast<std::size_t>(j)](b);
              for (int c = 0; c < 3; ++c) pol -= D[b][c] * de[static_cast<std::size_t>(j)](c);
              v += T[static_cast<std::size_t>(2 * i + j)](a, b) * pol;
            }
          expected[3 * i + a] = v;
        }
      expected[6] = f[0] * de[0](0) + f[1] * de[1](0) - mixed.value(0);
      expected[7] = f[0] * ds[0](1) + f[1] * ds[1](1) - mixed.value(1);
      expected[8] = f[0] * de[0](2) + f[1] * de[1](2) - mixed.value(2);
      for (int k = 0; k < 9; ++k) CHECK(std::abs(r(k) - expected[k]) < 1e-14);
    }
  }
}

TEST_CASE("Jacobian of the reduced system") {
  const auto ref = ReferenceMaterial::make(40.0, 30.0);

  SUBCASE("elastic single cluster without interaction") {
    const auto D = isotropic_elasticity(1.0, 2.0);
    const std::vector<Mat3> tangents{D}, T{Mat3::Zero()};
    const std::vector<double> f{1.0};
    const auto J = assemble_jacobian(tangents, T, f, ref, MacroIncrement{});
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
    expected.block<3, 3>(0, 0) = Mat3::Identity();
    expected.block<3, 3>(0, 3) = -Mat3::Identity();
    expected.block<3, 3>(3, 0) = Mat3::Identity();
    CHECK((J - expected).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("reference tangents decouple the clusters") {
    const std::vector<Mat3> tangents(3, ref.elasticity());
    Rng rng(1);
    std::vector<Mat3> T;
    for (int k = 0; k < 9; ++k) T.push_back(random_mat(rng, 1.0));
    const std::vector<double> f{0.2, 0.3, 0.5};
    const auto J = assemble_jacobian(tangents, T, f, ref, MacroIncrement{});
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        const Mat3 block = J.block<3, 3>(3 * i, 3 * k);
        CHECK((block - (i == k ? Mat3(Mat3::Identity()) : Mat3(Mat3::Zero()))).cwiseAbs().maxCoeff() < 1e-13);
      }
  }

  SUBCASE("central differences on a plastic 3-cluster system") {
    const auto mat = PhaseMaterial::von_mises(100.0, 0.3, 0.5, 0.2, 0.4);
    Rng rng(9);
    std::vector<ClusterState> states_n(3);
    for (auto& s : states_n) s = state_update(mat, ClusterState{}, random_vec(rng, 0.02)).state;
    std::vector<Mat3> T;
    for (int k = 0; k < 9; ++k) T.push_back(random_mat(rng, 0.01));
    const std::vector<double> f{0.2, 0.3, 0.5};
    MacroIncrement load;
    load.control = {Control::strain, Control::stress, Control::stress};
    load.value = Vec3(1e-3, 0.0, 0.0);

    auto residual_at = [&](const Eigen::VectorXd& x) {
      std::vector<Vec3> de(3), ds(3);
      for (int i = 0; i < 3; ++i) {
        de[static_cast<std::size_t>(i)] = x.segment<3>(3 * i);
        ds[static_cast<std::size_t>(i)] = state_update(mat, states_n[static_cast<std::size_t>(i)], de[static_cast<std::size_t>(i)]).state.delta_stress;
      }
      return assemble_residual(de, ds, x.segment<3>(9), T, f, ref, load);
    };
    Eigen::VectorXd x(12);
    for (int k = 0; k < 12; ++k) x(k) = 0.01 * (2.0 * rng.uniform() - 1.0);
    std::vector<Mat3> tangents(3);
    for (int i = 0; i < 3; ++i)
      tangents[static_cast<std::size_t>(i)] = state_update(mat, states_n[static_cast<std::size_t>(i)], x.segment<3>(3 * i)).tangent;
    const auto J = assemble_jacobian(tangents, T, f, ref, load);
    Eigen::MatrixXd fd(12, 12);
    const double h = 1e-7;
    for (int k = 0; k < 12; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      fd.col(k) = (residual_at(xp) - residual_at(xm)) / (2.0 * h);
    }
    CHECK((J - fd).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("Newton solve of one increment") {
  const auto grid = test::two_phase_grid(4, 4, [](int i, int) { return i < 2; });
  MaterialTable mats{{0, PhaseMaterial::elastic(10.0, 0.3)}, {1, PhaseMaterial::elastic(1.0, 0.2)}};
  const auto map = phase_map(grid);
  const auto ref = voigt_reference(grid, mats);
  const auto cit = assemble_matrix(map, assemble_green_operator(ref, FrequencyGrid(grid)));
  const auto T = cit.tensors(ref);
  const std::vector<ClusterState> states_n(2);
  SolverConfig cfg;

  SUBCASE("elastic problems converge in one iteration") {
    MacroIncrement load;
    load.value = Vec3(1e-3, -2e-4, 3e-4);
    const auto r = newton_solve_increment(map, mats, T, ref, states_n, load, cfg);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    const auto h = homogenize(r.states, map);
    CHECK(test::max_abs_diff(h.strain, load.value) < 1e-12);
  }

  SUBCASE("zero increment") {
    const auto r = newton_solve_increment(map, mats, T, ref, states_n, MacroIncrement{}, cfg);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    for (const auto& s : r.states) CHECK(s.delta_strain.isZero(0.0));
  }

  SUBCASE("mixed control meets the stress constraints") {
    MacroIncrement load;
    load.control = {Control::strain, Control::stress, Control::stress};
    load.value = Vec3(1e-3, 0.0, 0.0);
    const auto r = newton_solve_increment(map, mats, T, ref, states_n, load, cfg);
    REQUIRE(r.converged);
    const auto h = homogenize(r.states, map);
    CHECK(h.strain(0) == doctest::Approx(1e-3).epsilon(1e-10));
    CHECK(std::abs(h.stress(1)) < 1e-12);
    CHECK(std::abs(h.stress(2)) < 1e-12);
  }
}

TEST_CASE("self-consistent fit") {
  const ReferenceMaterial prev{1.0, 1.0};

  SUBCASE("recovers planted moduli") {
    Rng rng(12);
    for (int t = 0; t < 1000; ++t) {
      const double l = 0.1 + 10.0 * rng.uniform(), m = 0.1 + 10.0 * rng.uniform();
      const Vec3 de = nondegenerate_increment(rng, 1e-2);
      const Vec3 ds = isotropic_elasticity(l, m) * de;
      const auto fit = self_consistent_fit(de, ds, prev);
      CHECK(fit.status == FitStatus::ok);
      CHECK(test::rel_diff(fit.reference.lambda, l) < 1e-12);
      CHECK(test::rel_diff(fit.reference.mu, m) < 1e-12);
    }
  }

  SUBCASE("deviatoric increment keeps lambda") {
    const Vec3 de = mandel(1e-3, -1e-3, 2e-4);
    const auto fit = self_consistent_fit(de, 2.0 * 3.5 * de, prev);
    CHECK(fit.status == FitStatus::volumetric_free);
    CHECK(fit.reference.mu == doctest::Approx(3.5).epsilon(1e-14));
    CHECK(fit.reference.lambda == prev.lambda);
  }

  SUBCASE("zero strain keeps everything") {
    const auto fit = self_consistent_fit(Vec3::Zero(), Vec3(1, 2, 3), prev);
    CHECK(fit.status == FitStatus::zero_strain);
    CHECK(fit.reference == prev);
  }

  SUBCASE("matches a grid-search minimizer") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
      const Vec3 de = random_vec(rng, 1.0);
      const Vec3 ds = isotropic_elasticity(3.0, 2.0) * de + random_vec(rng, 0.3);
      const auto fit = self_consistent_fit(de, ds, prev);
      if (fit.status != FitStatus::ok) continue;
      auto objective = [&](double l, double m) { return (ds - isotropic_elasticity(l, m) * de).squaredNorm(); };
      double cl = 3.0, cm = 2.0, width = 8.0;
      for (int level = 0; level < 30; ++level) {
        double best = objective(cl, cm), bl = cl, bm = cm;
        for (int a = -10; a <= 10; ++a)
          for (int b = -10; b <= 10; ++b) {
            const double l = cl + width * a / 10.0, m = cm + width * b / 10.0;
            const double v = objective(l, m);
            if (v < best) {
              best = v;
              bl = l;
              bm = m;
            }
          }
        cl = bl;
        cm = bm;
        width *= 0.3;
      }
      CHECK(test::rel_diff(fit.reference.lambda, cl) < 1e-4);
      CHECK(test::rel_diff(fit.reference.mu, cm) < 1e-4);
    }
  }
}

TEST_CASE("self-consistent increment") {
  SolverConfig cfg;
  MacroIncrement load;
  load.value = Vec3(1e-3, 0.0, 0.0);

  SUBCASE("homogeneous material") {
    const VoxelGrid grid({4, 4}, {1.0, 1.0}, std::vector<int>(16, 0));
    MaterialTable mats{{0, PhaseMaterial::elastic(10.0, 0.3)}};
    const auto map = phase_map(grid);
    const auto ref = voigt_reference(grid, mats);
    const auto cit = assemble_matrix(map, assemble_green_operator(ref, FrequencyGrid(grid)));
    const auto r = run_self_consistent_increment(map, mats, cit, ref, std::vector<ClusterState>(1), load, cfg);
    CHECK(r.sc_iterations == 1);
    CHECK(r.reference.lambda == doctest::Approx(mats[0].lame_lambda()).epsilon(1e-12));
    CHECK(r.reference.mu == doctest::Approx(mats[0].shear_modulus()).epsilon(1e-12));
  }

  SUBCASE("laminate moduli within the phase bounds") {
    const auto grid = test::two_phase_grid(8, 8, [](int i, int) { return i < 4; });
    MaterialTable mats{{0, PhaseMaterial::elastic(10.0, 0.3)}, {1, PhaseMaterial::elastic(1.0, 0.2)}};
    ClusterMap map(64);
    for (int v = 0; v < 64; ++v) map.add_cluster(grid.label(v), {v});
    const auto ref = voigt_reference(grid, mats);
    const auto cit = assemble_matrix(map, assemble_green_operator(ref, FrequencyGrid(grid)));
    cfg.sc_tol = 1e-10;
    cfg.sc_max_iter = 50;
    const auto r = run_self_consistent_increment(map, mats, cit, ref, std::vector<ClusterState>(64), load, cfg);
    const double l_lo = std::min(mats[0].lame_lambda(), mats[1].lame_lambda());
    const double l_hi = std::max(mats[0].lame_lambda(), mats[1].lame_lambda());
    const double m_lo = std::min(mats[0].shear_modulus(), mats[1].shear_modulus());
    const double m_hi = std::max(mats[0].shear_modulus(), mats[1].shear_modulus());
    CHECK(r.reference.mu > m_lo);
    CHECK(r.reference.mu < m_hi);
    CHECK(r.reference.lambda > l_lo);
    CHECK(r.reference.lambda < l_hi);
    CHECK_FALSE(r.sc_unconverged);
  }

  SUBCASE("disabled loop equals a single Newton solve") {
    const auto grid = test::two_phase_grid(4, 4, [](int i, int j) { return i == j; });
    MaterialTable mats{{0, PhaseMaterial::von_mises(100.0, 0.3, 0.5, 0.2, 0.4)}, {1, PhaseMaterial::elastic(1.0, 0.19)}};
    const auto map = phase_map(grid);
    const auto ref = voigt_reference(grid, mats);
    const auto cit = assemble_matrix(map, assemble_green_operator(ref, FrequencyGrid(grid)));
    cfg.self_consistent = false;
    load.value = Vec3(2e-2, 0.0, 0.0);
    const std::vector<ClusterState> states_n(2);
    const auto r = run_self_consistent_increment(map, mats, cit, ref, states_n, load, cfg);
    const auto nr = newton_solve_increment(map, mats, cit.tensors(ref), ref, states_n, load, cfg);
    CHECK(r.sc_iterations == 1);
    CHECK(r.states == nr.states);
  }
}

TEST_CASE("homogenization") {
  SUBCASE("single cluster") {
    const auto map = map_of(4, {{0, 1, 2, 3}}, {0});
    ClusterState s;
    s.delta_strain = Vec3(1, 2, 3);
    s.delta_stress = Vec3(4, 5, 6);
    const auto h = homogenize(std::vector<ClusterState>{s}, map);
    CHECK(h.strain == s.delta_strain);
    CHECK(h.stress == s.delta_stress);
  }

  SUBCASE("opposite strains cancel") {
    const auto map = map_of(4, {{0, 1}, {2, 3}}, {0, 0});
    std::vector<ClusterState> s(2);
    s[0].strain = Vec3(1, -2, 3);
    s[1].strain = -s[0].strain;
    CHECK(homogenize_totals(s, map).strain.isZero(0.0));
  }
}

TEST_CASE("fracture criterion") {
  // 1000 matrix voxels and 10 particle voxels.
  std::vector<int> matrix = test::iota_vector(1000), particle = test::iota_vector(10, 1000);
  FractureCriterion crit;
  crit.phase = 0;
  crit.volume_fraction_threshold = 0.005;
  crit.acc_p_threshold = 0.25;

  auto states_for = [](const ClusterMap& map, double hot) {
    std::vector<ClusterState> s(static_cast<std::size_t>(map.n_active()));
    s[0].acc_p = hot;
    return s;
  };

  SUBCASE("no plastic strain") {
    const auto map = map_of(1010, {matrix, particle}, {0, 1});
    CHECK_FALSE(check_fracture(std::vector<ClusterState>(2), map, crit));
  }

  SUBCASE("whole matrix above the threshold") {
    const auto map = map_of(1010, {matrix, particle}, {0, 1});
    CHECK(check_fracture(states_for(map, 0.3), map, crit));
  }

  SUBCASE("phase-relative volume") {
    for (int hot : {6, 4}) {
      std::vector<int> a(matrix.begin(), matrix.begin() + hot), b(matrix.begin() + hot, matrix.end());
      const auto map = map_of(1010, {a, b, particle}, {0, 0, 1});
      CHECK(check_fracture(states_for(map, 0.3), map, crit) == (hot == 6));
    }
  }
}

TEST_CASE("toughness") {
  SUBCASE("linear path") {
    const std::vector<double> e{0.0, 0.01, 0.02, 0.03}, s{0.0, 1.0, 2.0, 3.0};
    CHECK(compute_toughness(e, s) == doctest::Approx(0.03 * 3.0 / 2.0).epsilon(1e-14));
  }
  SUBCASE("zero stress") {
    const std::vector<double> e{0.0, 0.5, 1.0}, s{0.0, 0.0, 0.0};
    CHECK(compute_toughness(e, s) == 0.0);
  }
  SUBCASE("polygon area") {
    const std::vector<double> e{0.0, 0.1, 0.3, 0.4, 0.7}, s{0.0, 2.0, 2.5, 1.0, 1.5};
    // Shoelace formula on the polygon closed along the strain axis.
    std::vector<std::pair<double, double>> poly;
    for (std::size_t i = 0; i < e.size(); ++i) poly.push_back({e[i], s[i]});
    poly.push_back({e.back(), 0.0});
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& p = poly[i];
      const auto& q = poly[(i + 1) % poly.size()];
      twice += p.first * q.second - q.first * p.second;
    }
    CHECK(std::abs(compute_toughness(e, s) - std::abs(twice) / 2.0) < 1e-12);
    CHECK(compute_toughness(e, s, 2) == doctest::Approx(0.1 + 0.45).epsilon(1e-14));
  }
}

TEST_CASE("reference materials") {
  const auto grid = test::two_phase_grid(4, 4, [](int i, int) { return i == 0; });
  MaterialTable mats{{0, PhaseMaterial::elastic(10.0, 0.3)}, {1, PhaseMaterial::elastic(2.0, 0.1)}};
  const auto ref = voigt_reference(grid, mats);
  CHECK(ref.lambda == doctest::Approx(0.75 * mats[0].lame_lambda() + 0.25 * mats[1].lame_lambda()));
  CHECK(ref.mu == doctest::Approx(0.75 * mats[0].shear_modulus() + 0.25 * mats[1].shear_modulus()));
  SolverConfig cfg;
  cfg.initial_reference = ReferenceRule::fixed;
  cfg.fixed_reference = ReferenceMaterial{2.0, 3.0};
  CHECK(initial_reference(cfg, grid, mats) == cfg.fixed_reference);
  MaterialTable missing{{0, PhaseMaterial::elastic(10.0, 0.3)}};
  CHECK_THROWS_AS(voigt_reference(grid, missing), InvalidInput);
}
