#include "crom/oracle.hpp"

#include "crom/error.hpp"
#include "crom/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace crom {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

MaterialTable elastic_only(const MaterialTable& materials) {
  MaterialTable out;
  for (const auto& [phase, m] : materials) out[phase] = PhaseMaterial::elastic(m.young, m.poisson);
  return out;
}

ReferenceMaterial oracle_reference(const VoxelGrid& grid, const MaterialTable& materials,
                                   const OracleConfig& cfg) {
  return cfg.reference ? *cfg.reference : voigt_reference(grid, materials);
}

Homogenized average(std::span<const ClusterState> states) {
  Homogenized h;
  for (const auto& s : states) {
    h.strain += s.strain;
    h.stress += in_plane(s.stress);
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  h.strain *= inv;
  h.stress *= inv;
  return h;
}

std::vector<ClusterState> increment_with_cuts(const VoxelGrid& grid, const MaterialTable& materials,
                                              const GreenOperator& green,
                                              std::span<const ClusterState> states_n,
                                              const Vec3& delta, const OracleConfig& cfg,
                                              int depth, OracleIncrement& info) {
  try {
    OracleIncrement local;
    auto out = solve_full_field_increment(grid, materials, green, states_n, delta, cfg, &local);
    info.iterations += local.iterations;
    return out;
  } catch (const ConvergenceError& e) {
    if (depth >= cfg.max_cuts)
      throw ConvergenceError(std::string(e.what()) + " after " + std::to_string(depth) +
                             " increment cuts");
  }
  ++info.cuts;
  auto mid = increment_with_cuts(grid, materials, green, states_n, 0.5 * delta, cfg, depth + 1, info);
  auto end = increment_with_cuts(grid, materials, green, mid, 0.5 * delta, cfg, depth + 1, info);
  for (std::size_t v = 0; v < end.size(); ++v) {
    end[v].delta_strain = end[v].strain - states_n[v].strain;
    end[v].delta_stress = in_plane(end[v].stress) - in_plane(states_n[v].stress);
  }
  return end;
}

}  // namespace

std::vector<ClusterState> solve_full_field_increment(const VoxelGrid& grid,
                                                     const MaterialTable& materials,
                                                     const GreenOperator& green,
                                                     std::span<const ClusterState> states_n,
                                                     const Vec3& delta_macro,
                                                     const OracleConfig& cfg,
                                                     OracleIncrement* info) {
  const int n = grid.size();
  require(states_n.size() == sz(n), "one state per voxel is required");
  require(green.size() == n, "Green operator does not match the grid");
  std::vector<const PhaseMaterial*> mats(sz(n));
  for (int v = 0; v < n; ++v) {
    const auto it = materials.find(grid.label(v));
    if (it == materials.end())
      throw InvalidInput("no material registered for phase " + std::to_string(grid.label(v)));
    mats[sz(v)] = &it->second;
  }
  const Mat3 D0 = green.reference().elasticity();
  const auto& fft = green.transform();

  // Start from the previous increment's field shifted to the new mean.
  std::vector<Vec3> de(sz(n));
  {
    Vec3 mean = Vec3::Zero();
    for (int v = 0; v < n; ++v) mean += states_n[sz(v)].delta_strain;
    mean /= n;
    for (int v = 0; v < n; ++v) de[sz(v)] = states_n[sz(v)].delta_strain - mean + delta_macro;
  }

  std::vector<ClusterState> states(sz(n));
  std::vector<std::complex<double>> tau[3], spec[3];
  for (int c = 0; c < 3; ++c) {
    tau[c].resize(sz(n));
    spec[c].resize(sz(n));
  }

  for (int it = 1;; ++it) {
    parallel_for(n, [&](int v) {
      auto up = state_update(*mats[sz(v)], states_n[sz(v)], de[sz(v)], false);
      const Vec3 pol = up.state.delta_stress - D0 * de[sz(v)];
      for (int c = 0; c < 3; ++c) tau[c][sz(v)] = pol(c);
      states[sz(v)] = std::move(up.state);
    });
    for (int c = 0; c < 3; ++c) fft.forward(tau[c], spec[c]);
    for (int k = 0; k < n; ++k) {
      const Mat3 phi = green.component(k);
      std::complex<double> t[3] = {spec[0][sz(k)], spec[1][sz(k)], spec[2][sz(k)]};
      for (int a = 0; a < 3; ++a)
        spec[a][sz(k)] = phi(a, 0) * t[0] + phi(a, 1) * t[1] + phi(a, 2) * t[2];
    }
    for (int c = 0; c < 3; ++c) fft.inverse(spec[c], tau[c]);

    double change = 0.0, size = 0.0;
    for (int v = 0; v < n; ++v) {
      Vec3 next;
      for (int c = 0; c < 3; ++c) next(c) = delta_macro(c) - tau[c][sz(v)].real();
      change += (next - de[sz(v)]).squaredNorm();
      size += next.squaredNorm();
      de[sz(v)] = next;
    }
    const bool converged = size == 0.0 ? change == 0.0 : std::sqrt(change / size) < cfg.tol;
    if (converged) {
      parallel_for(n, [&](int v) {
        states[sz(v)] = state_update(*mats[sz(v)], states_n[sz(v)], de[sz(v)], false).state;
      });
      if (info) info->iterations = it;
      return states;
    }
    if (!std::isfinite(change) || it >= cfg.max_iter)
      throw ConvergenceError("full-field fixed point did not converge in " + std::to_string(it) +
                             " iterations (relative change " +
                             std::to_string(std::sqrt(change / size)) + ")");
  }
}

FullFieldSolution solve_full_field(const VoxelGrid& grid, const MaterialTable& materials,
                                   const LoadingPath& loading, const OracleConfig& cfg,
                                   std::span<const int> checkpoints,
                                   const OracleObserver& observer) {
  loading.validate();
  for (const auto& inc : loading.increments)
    for (auto c : inc.control)
      require(c == Control::strain, "the full-field solver supports strain-driven loading only");
  require(cfg.tol > 0.0 && cfg.max_iter >= 1 && cfg.max_cuts >= 0, "invalid oracle settings");
  const GreenOperator green(oracle_reference(grid, materials, cfg), FrequencyGrid(grid));

  FullFieldSolution sol;
  sol.states.assign(sz(grid.size()), ClusterState{});
  sol.history.push_back(average(sol.states));
  const int count = static_cast<int>(loading.increments.size());
  for (int m = 1; m <= count; ++m) {
    OracleIncrement info;
    sol.states = increment_with_cuts(grid, materials, green, sol.states,
                                     loading.increments[sz(m - 1)].value, cfg, 0, info);
    sol.increments.push_back(info);
    sol.history.push_back(average(sol.states));
    if (std::find(checkpoints.begin(), checkpoints.end(), m) != checkpoints.end())
      sol.checkpoints[m] = sol.states;
    if (observer) observer(m, sol.states);
  }
  return sol;
}

FeatureDataset strain_concentration_features(const VoxelGrid& grid,
                                             const MaterialTable& materials,
                                             const OracleConfig& cfg) {
  const auto elastic = elastic_only(materials);
  const GreenOperator green(oracle_reference(grid, elastic, cfg), FrequencyGrid(grid));
  const int n = grid.size();
  std::vector<double> values(sz(n) * 9);
  const std::vector<ClusterState> zero(sz(n));
  for (int c = 0; c < 3; ++c) {
    const auto states =
        solve_full_field_increment(grid, elastic, green, zero, Vec3::Unit(c), cfg);
    for (int v = 0; v < n; ++v)
      for (int a = 0; a < 3; ++a) values[sz(v) * 9 + sz(a) * 3 + sz(c)] = states[sz(v)].strain(a);
  }
  std::vector<int> ids(sz(n));
  for (int v = 0; v < n; ++v) ids[sz(v)] = v;
  return FeatureDataset(9, std::move(values), std::move(ids));
}

double relative_error(double reduced, double reference) {
  require(reference != 0.0, "relative error needs a nonzero reference value");
  return std::abs(reduced - reference) / std::abs(reference) * 100.0;
}

double rmse_field(std::span<const double> reduced, std::span<const double> reference) {
  require(reduced.size() == reference.size() && !reduced.empty(),
          "fields must have the same nonzero size");
  double s = 0.0;
  for (std::size_t i = 0; i < reduced.size(); ++i) {
    const double d = reduced[i] - reference[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(reduced.size()));
}

}  // namespace crom
