#include "crom/solver.hpp"

#include "crom/error.hpp"

#include <cmath>
#include <string>

namespace crom {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

const PhaseMaterial& material_of(const MaterialTable& materials, int phase) {
  const auto it = materials.find(phase);
  if (it == materials.end())
    throw InvalidInput("no material registered for phase " + std::to_string(phase));
  return it->second;
}

double relative_change(const ReferenceMaterial& a, const ReferenceMaterial& b) {
  return std::hypot(a.lambda - b.lambda, a.mu - b.mu) / std::hypot(b.lambda, b.mu);
}

}  // namespace

LoadingPath LoadingPath::proportional(const std::array<Control, 3>& control, const Vec3& total,
                                      int count) {
  require(count >= 1, "loading path needs at least one increment");
  LoadingPath path;
  path.increments.assign(sz(count), MacroIncrement{control, total / count});
  return path;
}

void LoadingPath::validate() const {
  require(!increments.empty(), "loading path needs at least one increment");
  for (const auto& inc : increments)
    require(inc.value.allFinite(), "loading increments must be finite");
}

void SolverConfig::validate() const {
  require(newton_tol > 0.0, "newton_tol must be positive");
  require(newton_max_iter >= 1, "newton_max_iter must be at least 1");
  require(sc_tol > 0.0, "sc_tol must be positive");
  require(sc_max_iter >= 1, "sc_max_iter must be at least 1");
  require(max_cuts >= 0, "max_cuts must be nonnegative");
  if (initial_reference == ReferenceRule::fixed)
    require(fixed_reference.valid(), "fixed reference material is degenerate");
}

void FractureCriterion::validate() const {
  require(volume_fraction_threshold > 0.0, "fracture volume fraction threshold must be positive");
  require(acc_p_threshold > 0.0, "fracture plastic strain threshold must be positive");
}

ReferenceMaterial voigt_reference(const VoxelGrid& grid, const MaterialTable& materials) {
  double lambda = 0.0, mu = 0.0;
  for (int phase : grid.phases()) {
    const auto& m = material_of(materials, phase);
    const double c = static_cast<double>(grid.count(phase)) / grid.size();
    lambda += c * m.lame_lambda();
    mu += c * m.shear_modulus();
  }
  return ReferenceMaterial::make(lambda, mu, grid.ndim());
}

ReferenceMaterial initial_reference(const SolverConfig& cfg, const VoxelGrid& grid,
                                    const MaterialTable& materials) {
  if (cfg.initial_reference == ReferenceRule::fixed)
    return ReferenceMaterial::make(cfg.fixed_reference.lambda, cfg.fixed_reference.mu, grid.ndim());
  return voigt_reference(grid, materials);
}

// ---------------------------------------------------------------------------

Eigen::VectorXd assemble_residual(std::span<const Vec3> delta_strain,
                                  std::span<const Vec3> delta_stress, const Vec3& far_field,
                                  std::span<const Mat3> interaction,
                                  std::span<const double> fractions, const ReferenceMaterial& ref,
                                  const MacroIncrement& load) {
  const int n = static_cast<int>(delta_strain.size());
  require(delta_stress.size() == sz(n) && fractions.size() == sz(n) &&
              interaction.size() == sz(n) * sz(n),
          "reduced system dimensions do not match the cluster count");
  const Mat3 D0 = ref.elasticity();
  std::vector<Vec3> polarization(sz(n));
  for (int j = 0; j < n; ++j) polarization[sz(j)] = delta_stress[sz(j)] - D0 * delta_strain[sz(j)];

  Eigen::VectorXd r(3 * (n + 1));
  Vec3 mean_strain = Vec3::Zero(), mean_stress = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    Vec3 ri = delta_strain[sz(i)] - far_field;
    for (int j = 0; j < n; ++j) ri += interaction[sz(i) * sz(n) + sz(j)] * polarization[sz(j)];
    r.segment<3>(3 * i) = ri;
    mean_strain += fractions[sz(i)] * delta_strain[sz(i)];
    mean_stress += fractions[sz(i)] * delta_stress[sz(i)];
  }
  for (int c = 0; c < 3; ++c) {
    const double achieved =
        load.control[sz(c)] == Control::strain ? mean_strain(c) : mean_stress(c);
    r(3 * n + c) = achieved - load.value(c);
  }
  return r;
}

Eigen::MatrixXd assemble_jacobian(std::span<const Mat3> tangents,
                                  std::span<const Mat3> interaction,
                                  std::span<const double> fractions, const ReferenceMaterial& ref,
                                  const MacroIncrement& load) {
  const int n = static_cast<int>(tangents.size());
  require(fractions.size() == sz(n) && interaction.size() == sz(n) * sz(n),
          "reduced system dimensions do not match the cluster count");
  const Mat3 D0 = ref.elasticity();
  std::vector<Mat3> sensitivity(sz(n));
  for (int k = 0; k < n; ++k) sensitivity[sz(k)] = tangents[sz(k)] - D0;

  const int size = 3 * (n + 1);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      Mat3 block = interaction[sz(i) * sz(n) + sz(k)] * sensitivity[sz(k)];
      if (i == k) block += Mat3::Identity();
      J.block<3, 3>(3 * i, 3 * k) = block;
    }
    J.block<3, 3>(3 * i, 3 * n) = -Mat3::Identity();
  }
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < n; ++k) {
      if (load.control[sz(c)] == Control::strain)
        J(3 * n + c, 3 * k + c) = fractions[sz(k)];
      else
        J.block<1, 3>(3 * n + c, 3 * k) = fractions[sz(k)] * tangents[sz(k)].row(c);
    }
  }
  return J;
}

NewtonResult newton_solve_increment(const ClusterMap& map, const MaterialTable& materials,
                                    std::span<const Mat3> interaction,
                                    const ReferenceMaterial& ref,
                                    std::span<const ClusterState> states_n,
                                    const MacroIncrement& load, const SolverConfig& cfg,
                                    std::span<const Vec3> guess) {
  const int n = map.n_active();
  require(states_n.size() == sz(n), "one state per active cluster is required");
  require(guess.empty() || guess.size() == sz(n), "initial guess size mismatch");
  const auto fractions = map.volume_fractions();
  std::vector<const PhaseMaterial*> mats(sz(n));
  for (int i = 0; i < n; ++i) mats[sz(i)] = &material_of(materials, map.active(i).phase);

  std::vector<Vec3> de(sz(n)), ds(sz(n));
  std::vector<Mat3> tangents(sz(n));
  Vec3 far = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    de[sz(i)] = guess.empty() ? states_n[sz(i)].delta_strain : guess[sz(i)];
    far += fractions[sz(i)] * de[sz(i)];
  }
  const double load_norm = load.value.norm();
  const double scale = load_norm > 0.0 ? load_norm : 1.0;

  NewtonResult out;
  out.states.resize(sz(n));
  for (int it = 0;; ++it) {
    try {
      for (int i = 0; i < n; ++i) {
        auto up = state_update(*mats[sz(i)], states_n[sz(i)], de[sz(i)]);
        ds[sz(i)] = up.state.delta_stress;
        tangents[sz(i)] = up.tangent;
        out.states[sz(i)] = std::move(up.state);
      }
    } catch (const ConvergenceError& e) {
      out.failure = e.what();
      out.iterations = it;
      return out;
    }
    const Eigen::VectorXd r = assemble_residual(de, ds, far, interaction, fractions, ref, load);
    out.residual = r.norm() / scale;
    out.far_field = far;
    out.iterations = it;
    if (!std::isfinite(out.residual)) {
      out.failure = "non-finite residual";
      return out;
    }
    if (it > 0 && out.residual <= cfg.newton_tol) {
      out.converged = true;
      return out;
    }
    if (it == cfg.newton_max_iter) {
      out.failure = "Newton did not converge in " + std::to_string(it) +
                    " iterations (relative residual " + std::to_string(out.residual) + ")";
      return out;
    }
    const Eigen::MatrixXd J = assemble_jacobian(tangents, interaction, fractions, ref, load);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
      out.failure = "singular Jacobian (rcond " + std::to_string(rcond) + "); cut the increment";
      return out;
    }
    const Eigen::VectorXd dx = lu.solve(-r);
    for (int i = 0; i < n; ++i) de[sz(i)] += dx.segment<3>(3 * i);
    far += dx.segment<3>(3 * n);
  }
}

// ---------------------------------------------------------------------------

FitResult self_consistent_fit(const Vec3& delta_eps, const Vec3& delta_sigma,
                              const ReferenceMaterial& previous) {
  FitResult out{previous, FitStatus::ok};
  const double eps_norm = delta_eps.norm();
  if (!(eps_norm > 0.0)) {
    out.status = FitStatus::zero_strain;
    return out;
  }
  // Orthogonal split along u = (1, 1, 0) / sqrt(2): D(l, m) de has component
  // sqrt(2) tr (l + m) along u and 2 m de_perp across it, so the least-squares
  // problem decouples.
  const double tr = delta_eps(0) + delta_eps(1);
  const Vec3 u = Vec3(1.0, 1.0, 0.0) / kSqrt2;
  const Vec3 eps_perp = delta_eps - u.dot(delta_eps) * u;
  const Vec3 sig_perp = delta_sigma - u.dot(delta_sigma) * u;
  ReferenceMaterial fit = previous;
  if (!(eps_perp.norm() > 1e-12 * eps_norm)) {
    out.status = FitStatus::singular;
    return out;
  }
  fit.mu = sig_perp.dot(eps_perp) / (2.0 * eps_perp.squaredNorm());
  if (std::abs(tr) <= 1e-12 * eps_norm) {
    out.status = FitStatus::volumetric_free;
  } else {
    fit.lambda = u.dot(delta_sigma) / (kSqrt2 * tr) - fit.mu;
  }
  if (!fit.valid()) {
    out.status = FitStatus::invalid_moduli;
    return out;
  }
  out.reference = fit;
  return out;
}

IncrementResult run_self_consistent_increment(const ClusterMap& map,
                                              const MaterialTable& materials,
                                              const InteractionMatrix& cit,
                                              const ReferenceMaterial& ref,
                                              std::span<const ClusterState> states_n,
                                              const MacroIncrement& load, const SolverConfig& cfg,
                                              double guess_scale) {
  require(cit.cluster_ids() == map.active_ids(), "interaction matrix does not match cluster map");
  IncrementResult out;
  ReferenceMaterial current = ref;
  std::vector<Vec3> guess(states_n.size());
  for (std::size_t i = 0; i < guess.size(); ++i) guess[i] = guess_scale * states_n[i].delta_strain;

  for (int sc = 1;; ++sc) {
    const auto tensors = cit.tensors(current);
    auto nr = newton_solve_increment(map, materials, tensors, current, states_n, load, cfg, guess);
    out.newton_iterations += nr.iterations;
    out.sc_iterations = sc;
    if (!nr.converged) throw ConvergenceError(nr.failure);
    out.states = std::move(nr.states);
    out.far_field = nr.far_field;
    out.reference = current;
    if (!cfg.self_consistent) break;

    const auto h = homogenize(out.states, map);
    const auto fit = self_consistent_fit(h.strain, h.stress, current);
    if (fit.status != FitStatus::ok) out.sc_degenerate = true;
    if (relative_change(fit.reference, current) < cfg.sc_tol) break;
    if (sc == cfg.sc_max_iter) {
      out.sc_unconverged = true;
      break;
    }
    current = fit.reference;
    for (std::size_t i = 0; i < guess.size(); ++i) guess[i] = out.states[i].delta_strain;
  }
  return out;
}

namespace {

IncrementResult attempt(const ClusterMap& map, const MaterialTable& materials,
                        const InteractionMatrix& cit, const ReferenceMaterial& ref,
                        std::span<const ClusterState> states_n, const MacroIncrement& load,
                        const SolverConfig& cfg, int depth, double guess_scale) {
  try {
    return run_self_consistent_increment(map, materials, cit, ref, states_n, load, cfg,
                                         guess_scale);
  } catch (const ConvergenceError& e) {
    if (depth >= cfg.max_cuts)
      throw ConvergenceError(std::string(e.what()) + " after " + std::to_string(depth) +
                             " increment cuts");
  }
  const auto half = load.scaled(0.5);
  auto first = attempt(map, materials, cit, ref, states_n, half, cfg, depth + 1, 0.5 * guess_scale);
  auto second = attempt(map, materials, cit, first.reference, first.states, half, cfg, depth + 1, 1.0);
  IncrementResult out = std::move(second);
  out.newton_iterations += first.newton_iterations;
  out.sc_iterations += first.sc_iterations;
  out.sc_unconverged = out.sc_unconverged || first.sc_unconverged;
  out.sc_degenerate = out.sc_degenerate || first.sc_degenerate;
  out.cuts += first.cuts + 1;
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    auto& s = out.states[i];
    s.delta_strain = s.strain - states_n[i].strain;
    s.delta_stress = in_plane(s.stress) - in_plane(states_n[i].stress);
  }
  return out;
}

}  // namespace

IncrementResult solve_increment(const ClusterMap& map, const MaterialTable& materials,
                                const InteractionMatrix& cit, const ReferenceMaterial& ref,
                                std::span<const ClusterState> states_n,
                                const MacroIncrement& load, const SolverConfig& cfg) {
  return attempt(map, materials, cit, ref, states_n, load, cfg, 0, 1.0);
}

// ---------------------------------------------------------------------------

Homogenized homogenize(std::span<const ClusterState> states, const ClusterMap& map) {
  require(states.size() == sz(map.n_active()), "one state per active cluster is required");
  Homogenized h;
  for (int i = 0; i < map.n_active(); ++i) {
    const double f = map.active(i).volume_fraction;
    h.strain += f * states[sz(i)].delta_strain;
    h.stress += f * states[sz(i)].delta_stress;
  }
  return h;
}

Homogenized homogenize_totals(std::span<const ClusterState> states, const ClusterMap& map) {
  require(states.size() == sz(map.n_active()), "one state per active cluster is required");
  Homogenized h;
  for (int i = 0; i < map.n_active(); ++i) {
    const double f = map.active(i).volume_fraction;
    h.strain += f * states[sz(i)].strain;
    h.stress += f * in_plane(states[sz(i)].stress);
  }
  return h;
}

bool check_fracture(std::span<const ClusterState> states, const ClusterMap& map,
                    const FractureCriterion& crit) {
  require(states.size() == sz(map.n_active()), "one state per active cluster is required");
  double phase_fraction = 0.0, failed = 0.0;
  for (int i = 0; i < map.n_active(); ++i) {
    const auto& rec = map.active(i);
    if (rec.phase != crit.phase) continue;
    phase_fraction += rec.volume_fraction;
    if (states[sz(i)].acc_p > crit.acc_p_threshold) failed += rec.volume_fraction;
  }
  require(phase_fraction > 0.0, "fracture phase " + std::to_string(crit.phase) + " is not present");
  return failed / phase_fraction >= crit.volume_fraction_threshold;
}

double compute_toughness(std::span<const double> strain, std::span<const double> stress,
                         std::optional<int> last) {
  require(strain.size() == stress.size(), "strain and stress histories differ in length");
  const int n = static_cast<int>(strain.size());
  const int end = last ? *last : n - 1;
  require(end < n, "toughness end point beyond the history");
  double area = 0.0;
  for (int k = 1; k <= end; ++k)
    area += 0.5 * (stress[sz(k)] + stress[sz(k - 1)]) * (strain[sz(k)] - strain[sz(k - 1)]);
  return area;
}

}  // namespace crom
