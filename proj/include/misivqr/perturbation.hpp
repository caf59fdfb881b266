#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "misivqr/population.hpp"
#include "misivqr/quadrature.hpp"

namespace misivqr {

class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An epsilon-perturbation of a base model that leaves the observed (Y,D,Z)
// distribution unchanged while moving q(d_bar, .): the executable witness
// that the structural quantile function is not point identified.
//
// For d_bar = 0 the perturbed structure is
//   t(u)   = u + eps/(1-p0-p1) * (u - F_{Y|D*=0}(q(1,u)))
//   q~(0,.) = q(0, t(.)),  q~(1,.) = q(1,.),  p~ = (p0-eps, p1)
// with the latent law reweighted so that, given Z=z,
//   W0(u,z) := F~_{U|D*=0,Z}(u) f~_{D*,Z}(0,z)
//            = (u - eps/(1-p0-p1+eps) F_{Y|D*=0}(q(1,u))) f_{D*,Z}(0,z)
//   W1(u,z) := u f_{D*,Z}(1,z) + eps/(1-p0-p1+eps) F_{Y|D*=0}(q(1,u)) f_{D*,Z}(0,z).
// d_bar = 1 mirrors the construction with the treatment arms swapped.
//
// Requires an exogenous treatment (rho = 0, so F_{U|D*,Z} = F_U), a nonzero
// treatment effect at tau, and a rank map u -> qinv(q(1-d_bar+..), ..) regular
// enough that t stays a strictly increasing bijection; the constructor
// verifies t numerically and names the violated condition otherwise.
class PerturbedModel {
 public:
  PerturbedModel(StructuralModel base, double epsilon, int d_bar, double tau)
      : base_(std::move(base)), eps_(epsilon), d_bar_(d_bar) {
    base_.validate();
    if (d_bar_ != 0 && d_bar_ != 1) throw std::invalid_argument("d_bar must be 0 or 1");
    if (base_.rho != 0.0)
      throw ConstructionError("perturbation requires an exogenous treatment (rho = 0)");
    if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("tau must be in (0,1)");
    if (base_.q.value(0, tau) == base_.q.value(1, tau))
      throw ConstructionError("perturbation requires q(0,tau) != q(1,tau)");
    const double p_bar = d_bar_ == 0 ? base_.p0 : base_.p1;
    if (eps_ < 0.0 || (eps_ > 0.0 && eps_ >= p_bar))
      throw ConstructionError("epsilon must satisfy 0 <= eps < p_{d_bar}");
    verify_monotone_bijection();
  }

  const StructuralModel& base() const { return base_; }
  double epsilon() const { return eps_; }
  int d_bar() const { return d_bar_; }

  double p0_tilde() const { return d_bar_ == 0 ? base_.p0 - eps_ : base_.p0; }
  double p1_tilde() const { return d_bar_ == 1 ? base_.p1 - eps_ : base_.p1; }

  // F_{Y|D* = other}(q(other_arm... : the cross-arm rank map entering t;
  // with rho = 0 this is qinv(q(1-d_bar, u), d_bar) clamped to [0,1].
  double cross_rank(double u) const {
    const double y = base_.q.value(1 - d_bar_, u);
    return base_.q.inverse_clamped(d_bar_, y);
  }

  double t(double u) const {
    const double c = eps_ / (1.0 - base_.p0 - base_.p1);
    return u + c * (u - cross_rank(u));
  }

  double t_inverse(double v) const {
    if (v <= 0.0) return 0.0;
    if (v >= 1.0) return 1.0;
    return bisect_predicate([&](double u) { return t(u) >= v; }, 0.0, 1.0, 1e-13);
  }

  // Perturbed structural quantile function.
  double q_tilde(int d_star, double u) const {
    if (d_star == d_bar_) return base_.q.value(d_star, t(u));
    return base_.q.value(d_star, u);
  }

  // W_{d*}(u, z) = F~_{U|D*,Z}(u) f~_{D*,Z}(d*,z), joint over Z.
  double latent_sub_cdf(double u, int d_star, int z) const {
    u = std::min(std::max(u, 0.0), 1.0);
    const double pi = base_.propensity(z);
    const double mass_bar = (d_bar_ == 0 ? 1.0 - pi : pi) * base_.z_probs[z];
    const double mass_other = (d_bar_ == 0 ? pi : 1.0 - pi) * base_.z_probs[z];
    const double shift = eps_ / (1.0 - base_.p0 - base_.p1 + eps_);
    if (d_star == d_bar_) return (u - shift * cross_rank(u)) * mass_bar;
    return u * mass_other + shift * cross_rank(u) * mass_bar;
  }

  // P~(Y <= y, D = d, Z = z) under the perturbed structure, computed through
  // the construction (t inverted numerically), not through the algebraic
  // identities it is supposed to satisfy.
  double observed_sub_cdf(double y, int d, int z) const {
    const double u_bar = t_inverse(base_.q.inverse_clamped(d_bar_, y));
    const double u_other = base_.q.inverse_clamped(1 - d_bar_, y);
    const double g_bar = latent_sub_cdf(u_bar, d_bar_, z);
    const double g_other = latent_sub_cdf(u_other, 1 - d_bar_, z);
    const double g0 = d_bar_ == 0 ? g_bar : g_other;
    const double g1 = d_bar_ == 0 ? g_other : g_bar;
    if (d == 0) return (1.0 - p0_tilde()) * g0 + p1_tilde() * g1;
    return p0_tilde() * g0 + (1.0 - p1_tilde()) * g1;
  }

 private:
  void verify_monotone_bijection() const {
    // Uniform interior grid plus geometric points near both endpoints, where
    // non-Lipschitz rank maps (e.g. the sqrt arm) break monotonicity first.
    std::vector<double> grid;
    const int n = 2001;
    grid.reserve(n + 48);
    for (int i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) / n);
    for (int k = 3; k <= 14; ++k) {
      grid.push_back(std::pow(10.0, -k));
      grid.push_back(1.0 - std::pow(10.0, -k));
    }
    std::sort(grid.begin(), grid.end());
    if (std::abs(t(0.0)) > 1e-12 || std::abs(t(1.0) - 1.0) > 1e-12)
      throw ConstructionError("perturbation: t does not map [0,1] onto [0,1]");
    double prev = t(grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double cur = t(grid[i]);
      if (!(cur > prev) || cur < -1e-12 || cur > 1.0 + 1e-12)
        throw ConstructionError(
            "perturbation: t is not a strictly increasing bijection of [0,1] "
            "(Lipschitz/monotonicity condition fails for this family/epsilon)");
      prev = cur;
    }
  }

  StructuralModel base_;
  double eps_;
  int d_bar_;
};

inline PerturbedModel construct_perturbation(const StructuralModel& model, double epsilon,
                                             int d_bar, double tau) {
  return PerturbedModel(model, epsilon, d_bar, tau);
}

// Joint observed sub-CDF evaluator: (y, d, z) -> P(Y<=y, D=d, Z=z).
using ObservedJoint = std::function<double(double, int, int)>;

inline ObservedJoint observed_joint(const PopulationDistribution& pop) {
  return [&pop](double y, int d, int z) { return pop.sub_cdf_obs(y, d, z) * pop.z_prob(z); };
}

inline ObservedJoint observed_joint(const PerturbedModel& pm) {
  return [&pm](double y, int d, int z) { return pm.observed_sub_cdf(y, d, z); };
}

// Sup distance between two observed joint distributions over a y-grid times
// {0,1}^2; zero exactly when the two structures are observationally
// equivalent on the grid.
inline double sup_observed_distance(const ObservedJoint& a, const ObservedJoint& b, double y_lo,
                                    double y_hi, int y_grid = 401) {
  double worst = 0.0;
  for (int i = 0; i < y_grid; ++i) {
    const double y = y_lo + (y_hi - y_lo) * static_cast<double>(i) / (y_grid - 1);
    for (int d : {0, 1})
      for (int z : {0, 1}) worst = std::max(worst, std::abs(a(y, d, z) - b(y, d, z)));
  }
  return worst;
}

inline double verify_observational_equivalence(const StructuralModel& a, const PerturbedModel& b) {
  PopulationDistribution pop(a);
  return sup_observed_distance(observed_joint(pop), observed_joint(b), pop.y_min(), pop.y_max());
}

inline double verify_observational_equivalence(const StructuralModel& a,
                                               const StructuralModel& b) {
  PopulationDistribution pa(a), pb(b);
  return sup_observed_distance(observed_joint(pa), observed_joint(pb),
                               std::min(pa.y_min(), pb.y_min()),
                               std::max(pa.y_max(), pb.y_max()));
}

}  // namespace misivqr
