#include "doctest.h"
#include "support.hpp"

#include "crom/adaptivity.hpp"
#include "crom/cit.hpp"
#include "crom/error.hpp"
#include "crom/oracle.hpp"
#include "crom/rng.hpp"

using namespace crom;

namespace {

ClusterMap map_from_labels(const VoxelGrid& grid, const std::vector<int>& cluster_of_voxel) {
  ClusterMap map(grid.size());
  int n = 0;
  for (int c : cluster_of_voxel) n = std::max(n, c + 1);
  for (int c = 0; c < n; ++c) {
    std::vector<int> v;
    for (int i = 0; i < grid.size(); ++i)
      if (cluster_of_voxel[static_cast<std::size_t>(i)] == c) v.push_back(i);
    map.add_cluster(grid.label(v.front()), v);
  }
  return map;
}

AdaptivityConfig config(double ratio) {
  AdaptivityConfig c;
  c.trigger_ratio = ratio;
  c.adaptive_phases = {0};
  return c;
}

struct Problem {
  VoxelGrid grid;
  MaterialTable mats;
  FeatureDataset features;
  ClusterMap base;
};

Problem small_problem(int n) {
  Problem p;
  p.grid = test::two_phase_grid(n, n, [&](int i, int j) {
    const double di = i + 0.5 - n / 2.0, dj = j + 0.5 - n / 2.0;
    return di * di + dj * dj < n * n / 12.0;
  });
  p.mats = {{0, PhaseMaterial::von_mises(100.0, 0.3, 0.5, 0.2, 0.4)}, {1, PhaseMaterial::elastic(1.0, 0.19)}};
  p.features = strain_concentration_features(p.grid, p.mats);
  p.base = base_clustering(p.grid, p.features, {{0, 4}, {1, 2}}, 3);
  return p;
}

}  // namespace

TEST_CASE("adaptivity conditions") {
  auto cfg = config(0.1);
  cfg.frequency = 15;
  cfg.max_consecutive_steps = 1;
  cfg.cluster_budget = 100;
  cfg.min_feature_value = 1e-6;
  const std::map<int, double> yielded{{0, 0.01}, {1, 0.0}};
  CHECK(evaluate_adaptivity_conditions(30, 0, 50, yielded, cfg) == std::set<int>{0});
  CHECK(evaluate_adaptivity_conditions(31, 0, 50, yielded, cfg).empty());
  CHECK(evaluate_adaptivity_conditions(30, 1, 50, yielded, cfg).empty());
  CHECK(evaluate_adaptivity_conditions(30, 0, 100, yielded, cfg).empty());
  CHECK(evaluate_adaptivity_conditions(30, 0, 50, {{0, 0.0}, {1, 0.0}}, cfg).empty());
}

TEST_CASE("feature reconstruction") {
  const VoxelGrid grid({2, 3}, {1.0, 1.0}, std::vector<int>(6, 0));
  SUBCASE("single cluster") {
    const auto map = map_from_labels(grid, {0, 0, 0, 0, 0, 0});
    const auto f = reconstruct_field(map, std::vector<double>{0.7});
    for (double v : f) CHECK(v == 0.7);
  }
  SUBCASE("binary field") {
    const std::vector<int> labels{0, 1, 1, 0, 0, 1};
    const auto map = map_from_labels(grid, labels);
    const auto f = reconstruct_field(map, std::vector<double>{0.0, 1.0});
    for (std::size_t v = 0; v < 6; ++v) CHECK(f[v] == static_cast<double>(labels[v]));
    CHECK(rmse_field(f, reconstruct_field(map, std::vector<double>{0.0, 1.0})) == 0.0);
  }
  SUBCASE("cluster feature follows the states") {
    const auto map = map_from_labels(grid, {0, 1, 1, 0, 0, 1});
    std::vector<ClusterState> states(2);
    states[1].acc_p = 0.3;
    states[0].plastic_work = 2.0;
    CHECK(cluster_feature(states, map, AdaptivityFeature::acc_p) == std::vector<double>{0.0, 0.3});
    CHECK(cluster_feature(states, map, AdaptivityFeature::plastic_work) == std::vector<double>{2.0, 0.0});
  }
}

TEST_CASE("target selection") {
  // Two equal rows C A A B B A A with C = 0.1, A = 0.2, B = 0.5 (phase range [0.1, 0.5]).
  const VoxelGrid grid({2, 7}, {1.0, 1.0}, std::vector<int>(14, 0));
  const auto map = map_from_labels(grid, {2, 0, 0, 1, 1, 0, 0, 2, 0, 0, 1, 1, 0, 0});
  const std::vector<double> field{0.1, 0.2, 0.2, 0.5, 0.5, 0.2, 0.2, 0.1, 0.2, 0.2, 0.5, 0.5, 0.2, 0.2};
  Rng rng(1);

  SUBCASE("jump between A and B") {
    const auto t = select_targets(field, grid, map, {0}, config(0.1), rng);
    REQUIRE(t.find(0) != nullptr);
    REQUIRE(t.find(1) != nullptr);
    CHECK(t.find(0)->max_jump == doctest::Approx(0.75));
    CHECK(t.find(1)->max_jump == doctest::Approx(0.75));
    CHECK(t.find(1)->magnitude == doctest::Approx(0.65));
    REQUIRE(t.find(2) != nullptr);
    CHECK(t.find(2)->max_jump == doctest::Approx(0.25));
  }

  SUBCASE("lower side scaled by theta") {
    auto cfg = config(0.1);
    cfg.theta_low = 0.5;
    const auto t = select_targets(field, grid, map, {0}, cfg, rng);
    CHECK(t.find(0)->magnitude == doctest::Approx(0.325));
    CHECK(t.find(1)->magnitude == doctest::Approx(0.65));
  }

  SUBCASE("no targets") {
    CHECK(select_targets(std::vector<double>(14, 0.3), grid, map, {0}, config(0.1), rng).empty());
    CHECK(select_targets(field, grid, map, {0}, config(1.0), rng).empty());
    CHECK(select_targets(field, grid, map, {0}, config(0.8), rng).empty());
    CHECK(select_targets(field, grid, map, {}, config(0.1), rng).empty());
  }

  SUBCASE("level cap") {
    auto cfg = config(0.1);
    cfg.max_level = 0;
    CHECK(select_targets(field, grid, map, {0}, cfg, rng).empty());
  }
}

TEST_CASE("strided scan finds a subset of the full scan") {
  const auto p = small_problem(16);
  Rng frng(2);
  std::vector<double> field(256);
  for (auto& v : field) v = frng.uniform();
  const auto cfg1 = config(0.05);
  Rng r1(1);
  const auto full = select_targets(field, p.grid, p.base, {0, 1}, cfg1, r1);
  for (int X : {2, 3, 5}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto cfg = cfg1;
      cfg.scan_frequency = X;
      Rng r(seed);
      const auto part = select_targets(field, p.grid, p.base, {0, 1}, cfg, r);
      for (const auto& e : part.entries) {
        const auto* f = full.find(e.cluster);
        REQUIRE(f != nullptr);
        CHECK(e.max_jump <= f->max_jump);
      }
    }
  }
}

TEST_CASE("child counts") {
  TargetEntry t{0, 0.5, 0.4};
  auto cfg = config(0.1);

  cfg.child_volume_fraction = 0.2;
  cfg.split_factor = 1.0;
  CHECK(child_count(t, cfg, 1000) == 5);

  cfg.child_volume_fraction = 0.5;
  cfg.split_factor = 0.0;
  CHECK(child_count(t, cfg, 1000) == 2);

  cfg.child_volume_fraction = 0.125;
  cfg.split_factor = 0.7;
  cfg.split_amplitude = 0.6;
  cfg.magnitude_exponent = 1.0;
  int lo = 1000, hi = 0;
  for (int k = 0; k <= 100; ++k) {
    t.magnitude = (1.0 - cfg.trigger_ratio) * k / 100.0;
    const int n = child_count(t, cfg, 1000);
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  CHECK(lo == 3);
  CHECK(hi == 8);

  cfg.min_voxels_per_cluster = 100;
  CHECK(child_count(t, cfg, 250) == 2);
}

TEST_CASE("cluster budget") {
  TargetSet set;
  set.entries = {{1, 0.5, 0.5}, {2, 0.9, 0.9}, {3, 0.3, 0.3}};
  const std::map<int, int> counts{{1, 3}, {2, 3}, {3, 3}};
  auto cfg = config(0.0);

  cfg.cluster_budget = 1000;
  CHECK(enforce_budget(set, counts, cfg, 10).size() == 3);

  cfg.cluster_budget = 10;
  CHECK(enforce_budget(set, counts, cfg, 10).empty());

  cfg.cluster_budget = 13;
  const auto kept = enforce_budget(set, counts, cfg, 10);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].cluster == 2);
  CHECK(kept[1].cluster == 1);
}

TEST_CASE("cluster splitting and state inheritance") {
  const auto p = small_problem(8);

  SUBCASE("one voxel per child") {
    auto map = p.base;
    const int id = map.active_ids().front();
    const int n = static_cast<int>(map.record(id).voxels.size());
    const auto children = split_cluster(map, id, n, p.features, 1, 1, 2);
    CHECK(static_cast<int>(children.size()) == n);
    for (int c : children) CHECK(map.record(c).voxels.size() == 1);
    map.validate(p.grid);
  }

  SUBCASE("volume fractions and homogenized state are conserved") {
    auto map = p.base;
    const int id = map.active_ids()[1];
    const double f = map.record(id).volume_fraction;
    Rng rng(4);
    std::vector<ClusterState> states(static_cast<std::size_t>(map.n_active()));
    for (auto& s : states) {
      s.strain = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
      s.stress = Vec4(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
      s.acc_p = rng.uniform();
    }
    const auto before = homogenize_totals(states, map);
    const auto old_map = map;
    const auto children = split_cluster(map, id, 3, p.features, 7, 2, 2);
    double sum = 0.0;
    for (int c : children) sum += map.record(c).volume_fraction;
    CHECK(sum == doctest::Approx(f).epsilon(1e-14));
    const auto inherited = inherit_states(old_map, map, states);
    for (int c : children) CHECK(inherited[static_cast<std::size_t>(map.index_of(c))] == states[1]);
    const auto after = homogenize_totals(inherited, map);
    CHECK(test::max_abs_diff(after.strain, before.strain) < 1e-12);
    CHECK(test::max_abs_diff(after.stress, before.stress) < 1e-12);
  }

  SUBCASE("split is reproducible") {
    auto a = p.base, b = p.base;
    const int id = a.active_ids().front();
    split_cluster(a, id, 3, p.features, 11, 1, 3);
    split_cluster(b, id, 3, p.features, 11, 1, 3);
    CHECK(a.hash() == b.hash());
  }
}

TEST_CASE("adaptivity step") {
  const auto p = small_problem(12);
  const auto ref = voigt_reference(p.grid, p.mats);
  const auto green = assemble_green_operator(ref, FrequencyGrid(p.grid));
  const auto cit = assemble_matrix(p.base, green);
  std::vector<ClusterState> states(static_cast<std::size_t>(p.base.n_active()));

  SUBCASE("nothing to do") {
    const auto out = adaptivity_step(p.grid, p.base, cit, states, p.features, green, config(0.1), {0}, 5, 1);
    CHECK_FALSE(out.performed);
  }

  SUBCASE("one split") {
    states[0].acc_p = 0.2;
    auto cfg = config(0.1);
    cfg.cluster_budget = p.base.n_active() + 1;
    cfg.child_volume_fraction = 0.5;
    const auto out = adaptivity_step(p.grid, p.base, cit, states, p.features, green, cfg, {0}, 5, 1);
    REQUIRE(out.performed);
    CHECK(out.event.targets.size() == 1);
    CHECK(out.map.n_active() == p.base.n_active() + 1);
    CHECK(out.cit.size() == out.map.n_active());
    CHECK(symmetry_defect(out.cit) < 1e-12);
    CHECK(matrix_difference(out.cit, assemble_matrix(out.map, green)) < 1e-12);
    CHECK(out.event.clusters_before == p.base.n_active());
    CHECK(out.event.clusters_after == out.map.n_active());
  }
}

TEST_CASE("rewinding") {
  const auto p = small_problem(8);
  const auto ref = voigt_reference(p.grid, p.mats);
  const auto green = assemble_green_operator(ref, FrequencyGrid(p.grid));

  CHECK_FALSE(rewind_trigger(std::vector<ClusterState>(3)));
  std::vector<ClusterState> yielded(3);
  yielded[2].acc_p = 1e-9;
  CHECK(rewind_trigger(yielded));

  RunState start;
  start.map = p.base;
  start.cit = assemble_matrix(p.base, green);
  start.reference = ref;
  start.increment = 4;
  start.states.resize(static_cast<std::size_t>(p.base.n_active()));
  for (std::size_t i = 0; i < start.states.size(); ++i) start.states[i].acc_p = 0.01 * static_cast<double>(i);
  const auto snap = store_rewind_state(start, 5);
  CHECK(snap.increment == 5);

  SUBCASE("no splits") {
    const auto back = perform_rewind(snap, start.map, start.cit);
    CHECK(back.states == start.states);
    CHECK(back.map.hash() == start.map.hash());
    CHECK(back.increment == start.increment);
  }

  SUBCASE("children take the parent's snapshot state") {
    auto map = start.map;
    const int parent = map.active_ids()[2];
    const auto children = split_cluster(map, parent, 3, p.features, 1, 7, 2);
    const auto cit = incremental_update(start.cit, start.map, map, green);
    const auto back = perform_rewind(snap, map, cit);
    for (int c : children) CHECK(back.states[static_cast<std::size_t>(map.index_of(c))] == start.states[2]);
    const auto h0 = homogenize_totals(start.states, start.map);
    const auto h1 = homogenize_totals(back.states, map);
    CHECK(test::max_abs_diff(h0.strain, h1.strain) < 1e-12);
    CHECK(test::max_abs_diff(h0.stress, h1.stress) < 1e-12);
  }
}

TEST_CASE("online loop") {
  const auto p = small_problem(12);
  OnlineProblem prob;
  prob.grid = &p.grid;
  prob.materials = &p.mats;
  prob.features = &p.features;
  prob.loading = LoadingPath::proportional({Control::strain, Control::strain, Control::strain},
                                           Vec3(2e-2, 0.0, 0.0), 10);
  prob.fracture.phase = 0;
  prob.seed = 5;

  const auto sca = run_online(prob, p.base);
  REQUIRE(sca.state.history.size() == 11);
  CHECK(sca.events.empty());
  CHECK(sca.state.history[10].totals.strain(0) == doctest::Approx(2e-2).epsilon(1e-10));

  SUBCASE("trigger ratio of one changes nothing") {
    auto asca = prob;
    asca.adaptivity = config(1.0);
    asca.adaptivity->frequency = 1;
    const auto r = run_online(asca, p.base);
    REQUIRE(r.state.history.size() == sca.state.history.size());
    for (std::size_t m = 0; m < r.state.history.size(); ++m) {
      CHECK(r.state.history[m].totals.strain == sca.state.history[m].totals.strain);
      CHECK(r.state.history[m].totals.stress == sca.state.history[m].totals.stress);
    }
    CHECK(r.events.empty());
  }

  SUBCASE("adaptive run grows the clustering within the budget") {
    auto asca = prob;
    asca.adaptivity = config(0.1);
    asca.adaptivity->frequency = 2;
    asca.adaptivity->cluster_budget = 12;
    const auto a = run_online(asca, p.base);
    const auto b = run_online(asca, p.base);
    CHECK_FALSE(a.events.empty());
    CHECK(a.state.map.n_active() > p.base.n_active());
    CHECK(a.state.map.n_active() <= 12 + 8);
    a.state.map.validate(p.grid);
    CHECK(a.state.map.hash() == b.state.map.hash());
    CHECK(a.state.history.back().totals.stress == b.state.history.back().totals.stress);
  }
}
