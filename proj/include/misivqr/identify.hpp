#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "misivqr/bounds.hpp"
#include "misivqr/population.hpp"

namespace misivqr {

// Candidate structural quantile pair with misclassification nuisances.
struct ParamPoint {
  double y0 = 0.0;
  double y1 = 0.0;
  double p0 = 0.0;
  double p1 = 0.0;

  double theta() const { return y1 - y0; }

  void validate() const {
    if (!(p0 >= 0.0 && p1 >= 0.0 && p0 + p1 < 1.0))
      throw std::invalid_argument("ParamPoint: need p0,p1 >= 0 and p0+p1 < 1");
  }
};

// Upper bounds on the misclassification probabilities implied by the
// observed distribution. Two rules:
//   InstrumentCells — p0 <= min_z P(D=1|z), p1 <= min_z P(D=0|z); the
//     population analog of the inequality moment system with instrument
//     cells only (one outcome bin). An outer relaxation.
//   PointwiseDensity — p0 <= ess-inf f_{D|Y,Z}(1|y,z), p1 <= ess-inf
//     f_{D|Y,Z}(0|y,z), the conditional bounds enforced on a y-grid.
enum class PBoundRule { InstrumentCells, PointwiseDensity };

struct PBounds {
  double p0_max;
  double p1_max;
};

inline PBounds misclassification_bounds(const PopulationDistribution& pop,
                                        PBoundRule rule = PBoundRule::InstrumentCells,
                                        int density_grid = 401) {
  PBounds b{1.0, 1.0};
  const double ymax = pop.y_max();
  for (int z : {0, 1}) {
    b.p0_max = std::min(b.p0_max, pop.sub_cdf_obs(ymax, 1, z));
    b.p1_max = std::min(b.p1_max, pop.sub_cdf_obs(ymax, 0, z));
  }
  if (rule == PBoundRule::InstrumentCells) return b;
  const double lo = pop.y_min(), hi = pop.y_max();
  for (int z : {0, 1}) {
    for (int i = 0; i < density_grid; ++i) {
      const double y = lo + (hi - lo) * (i + 0.5) / density_grid;
      const double r = pop.density_ratio(1, y, z);
      if (std::isnan(r)) continue;  // outside the support
      b.p0_max = std::min(b.p0_max, r);
      b.p1_max = std::min(b.p1_max, 1.0 - r);
    }
  }
  return b;
}

struct FeasibilityResult {
  bool feasible = false;
  std::optional<ParamPoint> witness;  // set when feasible
};

namespace detail {

// One moment equality per instrument value, linear in (p1, p0):
//   p1 * a(z) + p0 * b(z) = c(z).
struct EqSystem {
  double a0, b0, c0;  // z = z0 row
  double a1, b1, c1;  // z = z1 row
};

constexpr double kFeasTol = 1e-9;
constexpr double kSingularTol = 1e-12;

inline bool in_box(double p0, double p1, const PBounds& b) {
  return p0 >= -kFeasTol && p1 >= -kFeasTol && p0 + p1 < 1.0 + kFeasTol &&
         p0 <= b.p0_max + kFeasTol && p1 <= b.p1_max + kFeasTol;
}

// Intersect { t : lo <= alpha*t + beta <= hi } with [tmin, tmax].
inline bool clip_interval(double alpha, double beta, double lo, double hi, double& tmin,
                          double& tmax) {
  if (std::abs(alpha) < 1e-300) return beta >= lo - kFeasTol && beta <= hi + kFeasTol;
  double a = (lo - beta) / alpha, b = (hi - beta) / alpha;
  if (a > b) std::swap(a, b);
  tmin = std::max(tmin, a);
  tmax = std::min(tmax, b);
  return tmin <= tmax + kFeasTol;
}

inline FeasibilityResult solve_feasible(const EqSystem& s, const PBounds& bounds) {
  FeasibilityResult res;
  const double det = s.a0 * s.b1 - s.b0 * s.a1;
  if (std::abs(det) > kSingularTol) {
    const double p1 = (s.c0 * s.b1 - s.b0 * s.c1) / det;
    const double p0 = (s.a0 * s.c1 - s.c0 * s.a1) / det;
    if (in_box(p0, p1, bounds)) {
      res.feasible = true;
      res.witness = ParamPoint{0.0, 0.0, std::max(p0, 0.0), std::max(p1, 0.0)};
    }
    return res;
  }
  // Rank <= 1: rows are proportional. Pick the dominant row, check the other
  // for consistency, then search the one-parameter solution family (a line in
  // (p0,p1)) against the box constraints by interval intersection.
  const double n0 = std::abs(s.a0) + std::abs(s.b0);
  const double n1 = std::abs(s.a1) + std::abs(s.b1);
  const double a = n0 >= n1 ? s.a0 : s.a1;
  const double b = n0 >= n1 ? s.b0 : s.b1;
  const double c = n0 >= n1 ? s.c0 : s.c1;
  const double a2 = n0 >= n1 ? s.a1 : s.a0;
  const double b2 = n0 >= n1 ? s.b1 : s.b0;
  const double c2 = n0 >= n1 ? s.c1 : s.c0;
  if (std::abs(a) < 1e-12 && std::abs(b) < 1e-12) {
    // Rank 0: feasible iff both right-hand sides vanish.
    if (std::abs(s.c0) <= kFeasTol && std::abs(s.c1) <= kFeasTol) {
      res.feasible = true;
      res.witness = ParamPoint{0.0, 0.0, 0.0, 0.0};
    }
    return res;
  }
  const double lam = std::abs(a) >= std::abs(b) ? a2 / a : b2 / b;
  if (std::abs(c2 - lam * c) > 1e-7) return res;  // proportional rows, inconsistent RHS
  if (std::abs(b) >= std::abs(a)) {
    // Parameterize by p1: p0 = (c - a*p1)/b.
    double tmin = 0.0, tmax = bounds.p1_max;
    const double alpha = -a / b, beta = c / b;
    if (!clip_interval(alpha, beta, 0.0, bounds.p0_max, tmin, tmax)) return res;
    if (!clip_interval(alpha + 1.0, beta, -1.0, 1.0 - 1e-12, tmin, tmax)) return res;
    if (tmin > tmax + kFeasTol) return res;
    const double p1 = 0.5 * (tmin + std::min(tmax, tmin + 1.0));
    const double p0 = alpha * p1 + beta;
    if (!in_box(p0, p1, bounds)) return res;
    res.feasible = true;
    res.witness = ParamPoint{0.0, 0.0, std::max(p0, 0.0), std::max(p1, 0.0)};
    return res;
  }
  double tmin = 0.0, tmax = bounds.p0_max;
  const double alpha = -b / a, beta = c / a;
  if (!clip_interval(alpha, beta, 0.0, bounds.p1_max, tmin, tmax)) return res;
  if (!clip_interval(alpha + 1.0, beta, -1.0, 1.0 - 1e-12, tmin, tmax)) return res;
  if (tmin > tmax + kFeasTol) return res;
  const double p0 = 0.5 * (tmin + std::min(tmax, tmin + 1.0));
  const double p1 = alpha * p0 + beta;
  if (!in_box(p0, p1, bounds)) return res;
  res.feasible = true;
  res.witness = ParamPoint{0.0, 0.0, std::max(p0, 0.0), std::max(p1, 0.0)};
  return res;
}

}  // namespace detail

// Checks whether (y0, y1) can be the structural quantiles at tau: solves the
// two moment equalities for (p0, p1) and validates the solution against the
// nonnegativity, p0+p1<1 and misclassification-bound constraints.
class FeasibilityChecker {
 public:
  FeasibilityChecker(const PopulationDistribution& pop, double tau,
                     PBoundRule rule = PBoundRule::InstrumentCells, int density_grid = 401)
      : pop_(pop), tau_(tau), bounds_(misclassification_bounds(pop, rule, density_grid)) {
    QuantileSpec check(tau);
    (void)check;
  }

  const PBounds& bounds() const { return bounds_; }

  FeasibilityResult check(double y0, double y1) const {
    detail::EqSystem s{};
    s.a0 = pop_.cdf_y(y0, 0) - tau_;
    s.b0 = pop_.cdf_y(y1, 0) - tau_;
    s.c0 = pop_.sub_cdf_obs(y0, 0, 0) + pop_.sub_cdf_obs(y1, 1, 0) - tau_;
    s.a1 = pop_.cdf_y(y0, 1) - tau_;
    s.b1 = pop_.cdf_y(y1, 1) - tau_;
    s.c1 = pop_.sub_cdf_obs(y0, 0, 1) + pop_.sub_cdf_obs(y1, 1, 1) - tau_;
    FeasibilityResult res = detail::solve_feasible(s, bounds_);
    if (res.witness) {
      res.witness->y0 = y0;
      res.witness->y1 = y1;
    }
    return res;
  }

 private:
  const PopulationDistribution& pop_;
  double tau_;
  PBounds bounds_;
};

inline FeasibilityResult feasibility(const PopulationDistribution& pop, double y0, double y1,
                                     double tau, PBoundRule rule = PBoundRule::InstrumentCells) {
  return FeasibilityChecker(pop, tau, rule).check(y0, y1);
}

struct IdentifiedSet {
  std::vector<ParamPoint> feasible;           // feasible grid points with witnesses
  std::optional<std::pair<double, double>> theta_interval;
  double grid_step = 0.0;
  std::pair<double, double> y_window{0.0, 1.0};
  std::size_t grid_cells = 0;
  PBounds bounds{1.0, 1.0};

  bool empty() const { return feasible.empty(); }
};

inline void to_json(nlohmann::json& j, const IdentifiedSet& s) {
  j = nlohmann::json{{"grid_step", s.grid_step},
                     {"y_window", {s.y_window.first, s.y_window.second}},
                     {"grid_cells", s.grid_cells},
                     {"feasible_count", s.feasible.size()},
                     {"p0_max", s.bounds.p0_max},
                     {"p1_max", s.bounds.p1_max}};
  if (s.theta_interval)
    j["theta_interval"] = {s.theta_interval->first, s.theta_interval->second};
  else
    j["theta_interval"] = nullptr;
}

inline std::string identified_set_to_csv(const IdentifiedSet& s) {
  std::string out = "y0,y1,p0,p1,theta\n";
  char buf[160];
  for (const auto& p : s.feasible) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.y0, p.y1, p.p0, p.p1,
                  p.theta());
    out += buf;
  }
  return out;
}

// Marks feasibility over the (y0, y1) grid and projects onto theta = y1 - y0.
inline IdentifiedSet identified_set(const PopulationDistribution& pop, double tau,
                                    std::pair<double, double> y_window = {0.0, 1.0},
                                    double grid_step = 0.005,
                                    PBoundRule rule = PBoundRule::InstrumentCells) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("identified_set: grid_step must be > 0");
  QuantileSpec check(tau);
  (void)check;
  const double lo = y_window.first, hi = y_window.second;
  if (!(hi > lo)) throw std::invalid_argument("identified_set: empty y window");
  const std::size_t npts = static_cast<std::size_t>(std::floor((hi - lo) / grid_step + 1e-9)) + 1;

  std::vector<double> ys(npts);
  for (std::size_t i = 0; i < npts; ++i) ys[i] = lo + grid_step * static_cast<double>(i);

  // Per grid value and z: F_{Y|z}, F_{Y,D=0|z}, F_{Y,D=1|z}.
  std::vector<std::array<double, 2>> fy(npts), h0(npts), h1(npts);
  for (std::size_t i = 0; i < npts; ++i)
    for (int z : {0, 1}) {
      fy[i][z] = pop.cdf_y(ys[i], z);
      h0[i][z] = pop.sub_cdf_obs(ys[i], 0, z);
      h1[i][z] = pop.sub_cdf_obs(ys[i], 1, z);
    }

  IdentifiedSet out;
  out.grid_step = grid_step;
  out.y_window = y_window;
  out.grid_cells = npts * npts;
  out.bounds = misclassification_bounds(pop, rule);

  double tlo = std::numeric_limits<double>::infinity();
  double thi = -std::numeric_limits<double>::infinity();
  for (std::size_t i0 = 0; i0 < npts; ++i0) {
    for (std::size_t i1 = 0; i1 < npts; ++i1) {
      detail::EqSystem s{fy[i0][0] - tau, fy[i1][0] - tau, h0[i0][0] + h1[i1][0] - tau,
                         fy[i0][1] - tau, fy[i1][1] - tau, h0[i0][1] + h1[i1][1] - tau};
      FeasibilityResult r = detail::solve_feasible(s, out.bounds);
      if (!r.feasible) continue;
      r.witness->y0 = ys[i0];
      r.witness->y1 = ys[i1];
      out.feasible.push_back(*r.witness);
      const double th = r.witness->theta();
      tlo = std::min(tlo, th);
      thi = std::max(thi, th);
    }
  }
  if (!out.feasible.empty()) out.theta_interval = {tlo, thi};
  return out;
}

}  // namespace misivqr
