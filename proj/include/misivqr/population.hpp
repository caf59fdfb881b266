#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "misivqr/model.hpp"
#include "misivqr/normal.hpp"
#include "misivqr/quadrature.hpp"

namespace misivqr {

// Exact population distributions implied by a StructuralModel.
//
// Latent layer: U uniform, D* = 1{V <= pi(z)} with (U,V) a Gaussian copula
// with correlation rho, so
//   F_{U|D*=1,Z=z}(u) = Phi2(PhiInv(u), PhiInv(pi(z)); rho) / pi(z)
//   F_{U|D*=0,Z=z}(u) = (u - pi(z) F_{U|D*=1,Z=z}(u)) / (1 - pi(z)).
// Observed layer mixes the true-treatment sub-distributions through the
// misclassification matrix. Conditional objects of an empty treatment arm
// (pi(z) in {0,1}) are the zero measure, never NaN.
class PopulationDistribution {
 public:
  explicit PopulationDistribution(StructuralModel m, double tol = 1e-10)
      : model_(std::move(m)), tol_(tol) {
    model_.validate();
  }

  const StructuralModel& model() const { return model_; }
  double tolerance() const { return tol_; }
  double propensity(int z) const { return model_.propensity(z); }
  double z_prob(int z) const { return model_.z_probs[z == 0 ? 0 : 1]; }
  double y_min() const { return model_.q.range_min(); }
  double y_max() const { return model_.q.range_max(); }

  // F_{U|D*=d,Z=z}; the zero function when the arm has no mass.
  double cdf_u_given_dstar(double u, int d_star, int z) const {
    const double pi = propensity(z);
    u = clamp01(u);
    if (d_star == 1) {
      if (pi <= 0.0) return 0.0;
      if (pi >= 1.0) return u;
      if (u <= 0.0) return 0.0;
      if (u >= 1.0) return 1.0;
      return bvn_cdf(norm_quantile(u), norm_quantile(pi), model_.rho) / pi;
    }
    if (pi >= 1.0) return 0.0;
    if (pi <= 0.0) return u;
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return (u - pi * cdf_u_given_dstar(u, 1, z)) / (1.0 - pi);
  }

  // f_{U,D*|Z=z}(u, d): joint density of (U, D*) given Z; for d=1 this is
  // P(V <= pi(z) | U=u) since U is uniform.
  double latent_joint_density(double u, int d_star, int z) const {
    const double pi = propensity(z);
    double treated;
    if (pi <= 0.0)
      treated = 0.0;
    else if (pi >= 1.0)
      treated = 1.0;
    else if (model_.rho == 0.0)
      treated = pi;
    else {
      u = std::min(std::max(u, 1e-15), 1.0 - 1e-15);
      const double s = std::sqrt((1.0 - model_.rho) * (1.0 + model_.rho));
      treated = norm_cdf((norm_quantile(pi) - model_.rho * norm_quantile(u)) / s);
    }
    return d_star == 1 ? treated : 1.0 - treated;
  }

  double density_u_given_dstar(double u, int d_star, int z) const {
    const double pi = propensity(z);
    const double mass = d_star == 1 ? pi : 1.0 - pi;
    if (mass <= 0.0) return 0.0;
    return latent_joint_density(u, d_star, z) / mass;
  }

  double cdf_y_given_dstar(double y, int d_star, int z) const {
    return cdf_u_given_dstar(model_.q.inverse_clamped(d_star, y), d_star, z);
  }

  // F_{Y,D*=d|Z=z}(y) = P(Y <= y, D* = d | Z = z)
  double sub_cdf_dstar(double y, int d_star, int z) const {
    const double pi = propensity(z);
    const double mass = d_star == 1 ? pi : 1.0 - pi;
    if (mass <= 0.0) return 0.0;
    return mass * cdf_y_given_dstar(y, d_star, z);
  }

  double cdf_y(double y, int z) const {
    return sub_cdf_dstar(y, 0, z) + sub_cdf_dstar(y, 1, z);
  }

  // Observed-treatment sub-CDF F_{Y,D=d|Z=z}(y): misclassification mixing of
  // the true-treatment sub-CDFs.
  double sub_cdf_obs(double y, int d, int z) const {
    const double g0 = sub_cdf_dstar(y, 0, z);
    const double g1 = sub_cdf_dstar(y, 1, z);
    if (d == 0) return (1.0 - model_.p0) * g0 + model_.p1 * g1;
    return model_.p0 * g0 + (1.0 - model_.p1) * g1;
  }

  // f_{Y,D*=d|Z=z}(y) on the interior of the support of arm d.
  double sub_density_dstar(double y, int d_star, int z) const {
    const double pi = propensity(z);
    const double mass = d_star == 1 ? pi : 1.0 - pi;
    if (mass <= 0.0) return 0.0;
    const double lo = model_.q.value(d_star, 0.0), hi = model_.q.value(d_star, 1.0);
    if (y <= lo || y >= hi) return 0.0;
    const double u = model_.q.inverse(d_star, y);
    return latent_joint_density(u, d_star, z) * model_.q.inverse_derivative(d_star, y);
  }

  double density_y(double y, int z) const {
    return sub_density_dstar(y, 0, z) + sub_density_dstar(y, 1, z);
  }

  double obs_sub_density(double y, int d, int z) const {
    const double f0 = sub_density_dstar(y, 0, z);
    const double f1 = sub_density_dstar(y, 1, z);
    if (d == 0) return (1.0 - model_.p0) * f0 + model_.p1 * f1;
    return model_.p0 * f0 + (1.0 - model_.p1) * f1;
  }

  // f_{D|Y,Z}(d|y,z); NaN where f_{Y|Z}(y) = 0 (outside the support).
  double density_ratio(int d, double y, int z) const {
    const double tot = density_y(y, z);
    if (!(tot > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return obs_sub_density(y, d, z) / tot;
  }

  // Q_{Y|Z=z}(tau) as the left-continuous inverse, by predicate bisection.
  double quantile_y(double tau, int z) const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("quantile_y: tau must be in (0,1)");
    return bisect_predicate([&](double y) { return cdf_y(y, z) >= tau; }, y_min(), y_max(), tol_);
  }

 private:
  static double clamp01(double u) { return std::min(std::max(u, 0.0), 1.0); }

  StructuralModel model_;
  double tol_;
};

inline PopulationDistribution population_joint(const StructuralModel& m) {
  return PopulationDistribution(m);
}

}  // namespace misivqr
