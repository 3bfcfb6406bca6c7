#include "crom/materials.hpp"

#include "crom/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crom {

namespace {

constexpr int kReturnMapMaxIter = 50;

}  // namespace

PhaseMaterial PhaseMaterial::elastic(double young, double poisson) {
  PhaseMaterial m;
  m.kind = MaterialKind::elastic;
  m.young = young;
  m.poisson = poisson;
  m.validate();
  return m;
}

PhaseMaterial PhaseMaterial::von_mises(double young, double poisson, double sigma_y0,
                                       double coefficient, double exponent) {
  PhaseMaterial m;
  m.kind = MaterialKind::von_mises;
  m.young = young;
  m.poisson = poisson;
  m.hardening = {sigma_y0, coefficient, exponent};
  m.validate();
  return m;
}

void PhaseMaterial::validate() const {
  require(std::isfinite(young) && young > 0.0, "young modulus must be positive");
  require(poisson > -1.0 && poisson < 0.5, "poisson ratio must lie in (-1, 0.5)");
  if (kind == MaterialKind::von_mises) {
    require(hardening.sigma_y0 > 0.0, "initial yield stress must be positive");
    require(hardening.coefficient >= 0.0, "hardening coefficient must be nonnegative");
    require(hardening.exponent > 0.0 && hardening.exponent <= 1.0,
            "hardening exponent must lie in (0, 1]");
  }
}

double hardening_stress(const PhaseMaterial& mat, double acc_p) {
  require(mat.kind == MaterialKind::von_mises, "elastic material has no yield stress");
  require(acc_p >= 0.0, "accumulated plastic strain must be nonnegative");
  const auto& h = mat.hardening;
  if (h.coefficient == 0.0) return h.sigma_y0;
  return h.sigma_y0 + h.coefficient * std::pow(acc_p, h.exponent);
}

double hardening_slope(const PhaseMaterial& mat, double acc_p) {
  require(mat.kind == MaterialKind::von_mises, "elastic material has no yield stress");
  const auto& h = mat.hardening;
  if (h.coefficient == 0.0) return 0.0;
  if (h.exponent == 1.0) return h.coefficient;
  const double p = std::max(acc_p, kHardeningSlopeFloor);
  return h.coefficient * h.exponent * std::pow(p, h.exponent - 1.0);
}

Mat3 elastic_tangent(const PhaseMaterial& mat) {
  return isotropic_elasticity(mat.lame_lambda(), mat.shear_modulus());
}

StateUpdate state_update(const PhaseMaterial& mat, const ClusterState& state_n,
                         const Vec3& delta_strain, bool with_tangent) {
  const double lambda = mat.lame_lambda();
  const double G = mat.shear_modulus();
  const Mat4 De = isotropic_elasticity4(lambda, G);

  StateUpdate out;
  auto& s = out.state;
  s = state_n;
  s.strain = state_n.strain + delta_strain;
  s.delta_strain = delta_strain;

  const Vec4 elastic_trial = embed_plane(s.strain) - state_n.plastic_strain;
  const Vec4 stress_trial = De * elastic_trial;

  auto finish = [&](const Mat4& tangent) {
    s.delta_stress = in_plane(s.stress) - in_plane(state_n.stress);
    if (with_tangent) out.tangent = in_plane(tangent);
    return out;
  };

  if (mat.kind == MaterialKind::elastic) {
    s.stress = stress_trial;
    return finish(De);
  }

  const Vec4 dev_trial = deviator(stress_trial);
  const double q_trial = von_mises(dev_trial);
  const double p_n = state_n.acc_p;
  const double sy0 = mat.hardening.sigma_y0;
  const double tol = 1e-12 * sy0;
  if (q_trial - hardening_stress(mat, p_n) <= tol) {
    s.stress = stress_trial;
    return finish(De);
  }

  // Solve q_trial - 3 G dp - sigma_y(p_n + dp) = 0 on the bracket [0, q_trial / 3G].
  const auto& h = mat.hardening;
  double slope_at = 0.0;
  // Residual at dp; also leaves the hardening slope at p_n + dp in slope_at.
  auto residual = [&](double dp) {
    const double p = p_n + dp;
    double sy = h.sigma_y0;
    slope_at = 0.0;
    if (h.coefficient != 0.0) {
      if (h.exponent == 1.0) {
        sy += h.coefficient * p;
        slope_at = h.coefficient;
      } else {
        const double pe = std::pow(p, h.exponent);
        sy += h.coefficient * pe;
        slope_at = p >= kHardeningSlopeFloor ? h.coefficient * h.exponent * pe / p
                                             : hardening_slope(mat, p);
      }
    }
    return q_trial - 3.0 * G * dp - sy;
  };
  double lo = 0.0, hi = q_trial / (3.0 * G);
  double dp = 0.0;
  double r = residual(dp);
  int it = 0;
  for (;;) {
    if (std::abs(r) <= tol) break;
    if (++it > kReturnMapMaxIter)
      throw ConvergenceError("von Mises return mapping did not converge (dp = " +
                             std::to_string(dp) + ", residual = " + std::to_string(r) + ")");
    if (r > 0.0)
      lo = dp;
    else
      hi = dp;
    const double slope = -3.0 * G - slope_at;
    double next = dp - r / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == dp) break;
    dp = next;
    r = residual(dp);
  }

  const Vec4 flow = 1.5 * dev_trial / q_trial;
  const Vec4 delta_plastic = dp * flow;
  s.plastic_strain = state_n.plastic_strain + delta_plastic;
  s.acc_p = p_n + dp;
  s.stress = stress_trial - 2.0 * G * delta_plastic;
  s.plastic_work = state_n.plastic_work + 0.5 * (state_n.stress + s.stress).dot(delta_plastic);
  out.plastic = true;
  out.iterations = it;

  if (!with_tangent) return finish(Mat4::Zero());
  const double H = slope_at;
  const Vec4 i = identity4();
  const Mat4 dev_proj = Mat4::Identity() - i * i.transpose() / 3.0;
  const Vec4 n = dev_trial / dev_trial.norm();
  const double K = lambda + 2.0 * G / 3.0;
  const Mat4 tangent = K * i * i.transpose() +
                       2.0 * G * (1.0 - 3.0 * G * dp / q_trial) * dev_proj +
                       6.0 * G * G * (dp / q_trial - 1.0 / (3.0 * G + H)) * n * n.transpose();
  return finish(tangent);
}

}  // namespace crom
