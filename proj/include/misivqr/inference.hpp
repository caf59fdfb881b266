#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "misivqr/moments.hpp"
#include "misivqr/parallel.hpp"
#include "misivqr/rng.hpp"

namespace misivqr {

struct InferenceConfig {
  double alpha = 0.10;           // test size
  int b_reps = 500;              // bootstrap replications
  double kappa_scale = 1.0;      // kappa_n = kappa_scale * sqrt(log n)
  double theta_lo = -0.2;
  double theta_hi = 0.8;
  double theta_step = 0.02;
  int y_grid = 41;               // coarse nuisance grid over the y window
  int p_grid = 21;               // coarse grid per misclassification rate on [0, 0.5]
  int refine_rounds = 2;
  int refine_factor = 5;
  std::optional<std::pair<double, double>> y_window;  // default: sample range
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must be in (0,1)");
    if (b_reps < 100) throw std::invalid_argument("config: b_reps must be >= 100");
    if (!(theta_step > 0.0)) throw std::invalid_argument("config: theta_step must be > 0");
    if (y_grid < 2 || p_grid < 2) throw std::invalid_argument("config: grids must have >= 2 points");
    if (refine_rounds < 0 || refine_factor < 2)
      throw std::invalid_argument("config: bad refinement settings");
  }

  double kappa_n(std::size_t n) const { return kappa_scale * std::sqrt(std::log(static_cast<double>(n))); }

  std::vector<double> theta_values() const {
    const int count =
        static_cast<int>(std::floor((theta_hi - theta_lo) / theta_step + 1e-9)) + 1;
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v.push_back(theta_lo + i * theta_step);
    return v;
  }
};

inline void to_json(nlohmann::json& j, const InferenceConfig& c) {
  j = nlohmann::json{{"alpha", c.alpha},
                     {"b_reps", c.b_reps},
                     {"kappa_scale", c.kappa_scale},
                     {"theta_lo", c.theta_lo},
                     {"theta_hi", c.theta_hi},
                     {"theta_step", c.theta_step},
                     {"y_grid", c.y_grid},
                     {"p_grid", c.p_grid},
                     {"refine_rounds", c.refine_rounds},
                     {"refine_factor", c.refine_factor},
                     {"seed", c.seed}};
  if (c.y_window) j["y_window"] = {c.y_window->first, c.y_window->second};
}

inline void from_json(const nlohmann::json& j, InferenceConfig& c) {
  c.alpha = j.value("alpha", 0.10);
  c.b_reps = j.value("b_reps", 500);
  c.kappa_scale = j.value("kappa_scale", 1.0);
  c.theta_lo = j.value("theta_lo", -0.2);
  c.theta_hi = j.value("theta_hi", 0.8);
  c.theta_step = j.value("theta_step", 0.02);
  c.y_grid = j.value("y_grid", 41);
  c.p_grid = j.value("p_grid", 21);
  c.refine_rounds = j.value("refine_rounds", 2);
  c.refine_factor = j.value("refine_factor", 5);
  if (j.contains("y_window")) {
    auto w = j.at("y_window").get<std::array<double, 2>>();
    c.y_window = {w[0], w[1]};
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
}

struct TestResult {
  double theta_null = 0.0;
  double statistic = 0.0;
  double critical_value = 0.0;
  bool reject = false;
  ParamPoint minimizer;
  double critical_value_discard = 0.0;    // discard-route quantile, diagnostic
  double critical_value_reprofile = 0.0;  // re-profiling-route quantile, diagnostic
};

inline void to_json(nlohmann::json& j, const TestResult& r) {
  j = nlohmann::json{{"theta_null", r.theta_null},
                     {"statistic", r.statistic},
                     {"critical_value", r.critical_value},
                     {"reject", r.reject},
                     {"minimizer",
                      {{"y0", r.minimizer.y0}, {"y1", r.minimizer.y1}, {"p0", r.minimizer.p0}, {"p1", r.minimizer.p1}}},
                     {"critical_value_discard", r.critical_value_discard},
                     {"critical_value_reprofile", r.critical_value_reprofile}};
}

struct ConfidenceSet {
  std::vector<TestResult> per_theta;
  std::vector<double> accepted;
  std::optional<std::pair<double, double>> hull;
};

inline void to_json(nlohmann::json& j, const ConfidenceSet& s) {
  j = nlohmann::json{{"accepted", s.accepted}, {"per_theta", s.per_theta}};
  if (s.hull)
    j["hull"] = {s.hull->first, s.hull->second};
  else
    j["hull"] = nullptr;
}

inline std::string confidence_set_to_csv(const ConfidenceSet& s) {
  std::string out = "theta,statistic,critical_value,reject\n";
  char buf[128];
  for (const auto& r : s.per_theta) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", r.theta_null, r.statistic,
                  r.critical_value, r.reject ? 1 : 0);
    out += buf;
  }
  return out;
}

namespace detail {

inline constexpr std::uint64_t kBootstrapTag = 0xB007B007ull;

// Type-1 empirical quantile of the bootstrap draws; level <= 0 degenerates to
// zero (everything rejected in the alpha -> 1 limit).
inline double bootstrap_quantile(std::vector<double> draws, double level) {
  if (level <= 0.0) return 0.0;
  return empirical_quantile(std::move(draws), std::min(level, 1.0));
}

}  // namespace detail

// Subvector test for theta = q(1,tau) - q(0,tau): profiles the nuisances
// (y0, p0, p1) with y1 = y0 + theta over deterministic nested grids, and
// calibrates with a min-resampling multiplier bootstrap:
//   (i)  discard route: recentered bootstrap moments at the sample argmin,
//        inequalities kept only when their sample slack is within kappa_n;
//   (ii) re-profiling route: the same bootstrap criterion minimized over the
//        coarse-grid points whose equality moments are within kappa_n of
//        feasible (the hardening that makes re-profiling meaningful: grid
//        points with grossly violated equalities cannot host the minimum);
// the critical value is the (1-alpha) quantile of the pointwise minimum.
class SubvectorTest {
 public:
  SubvectorTest(const Dataset& ds, const MomentSpec& spec, InferenceConfig config)
      : dataset_(ds), kernel_(ds, spec), config_(std::move(config)) {
    config_.validate();
    double lo = ds.obs.front().y, hi = ds.obs.front().y;
    for (const auto& o : ds.obs) {
      lo = std::min(lo, o.y);
      hi = std::max(hi, o.y);
    }
    y_window_ = config_.y_window.value_or(std::pair<double, double>{lo, hi});
    if (!(y_window_.second > y_window_.first))
      throw std::invalid_argument("inference: empty nuisance search window");
  }

  const MomentKernel& kernel() const { return kernel_; }
  const InferenceConfig& config() const { return config_; }

  struct Profile {
    double statistic;
    ParamPoint argmin;
  };

  Profile profiled_statistic(double theta_null) const {
    std::vector<MomentKernel::PointCache> coarse;
    return profile_with_caches(theta_null, &coarse);
  }

  TestResult test(double theta_null) const {
    std::vector<MomentKernel::PointCache> coarse;
    const Profile prof = profile_with_caches(theta_null, &coarse);
    const double kappa = config_.kappa_n(kernel_.n());

    MomentKernel::PointCache argmin_cache = kernel_.make_cache(prof.argmin);
    mark_active(argmin_cache, kappa);

    // Re-profiling candidate set: hardened-feasible coarse points + argmin.
    std::vector<MomentKernel::PointCache> candidates;
    candidates.reserve(coarse.size() + 1);
    for (auto& c : coarse) {
      if (!c.eq_hardened) continue;
      mark_active(c, kappa);
      candidates.push_back(std::move(c));
    }
    if (argmin_cache.eq_hardened) candidates.push_back(argmin_cache);

    const std::size_t n = kernel_.n();
    std::vector<double> dr(static_cast<std::size_t>(config_.b_reps));
    std::vector<double> pr(dr.size());
    std::vector<double> mr(dr.size());
    std::vector<double> w(n);
    for (int b = 0; b < config_.b_reps; ++b) {
      const std::uint64_t draw_seed = derive_seed(config_.seed, detail::kBootstrapTag, b);
      for (std::size_t i = 0; i < n; ++i)
        w[i] = norm_quantile(SplitRng(draw_seed, i).next_double());
      const auto draw = kernel_.make_draw(w);
      const double t_dr = kernel_.bootstrap_statistic(argmin_cache, draw);
      double t_pr = t_dr;
      if (!candidates.empty()) {
        t_pr = std::numeric_limits<double>::infinity();
        for (const auto& c : candidates)
          t_pr = std::min(t_pr, kernel_.bootstrap_statistic(c, draw));
      }
      dr[b] = t_dr;
      pr[b] = t_pr;
      mr[b] = std::min(t_dr, t_pr);
    }

    TestResult out;
    out.theta_null = theta_null;
    out.statistic = prof.statistic;
    out.minimizer = prof.argmin;
    out.critical_value = detail::bootstrap_quantile(mr, 1.0 - config_.alpha);
    out.critical_value_discard = detail::bootstrap_quantile(dr, 1.0 - config_.alpha);
    out.critical_value_reprofile = detail::bootstrap_quantile(pr, 1.0 - config_.alpha);
    out.reject = out.statistic > out.critical_value;
    return out;
  }

  ConfidenceSet confidence_interval() const {
    const std::vector<double> thetas = config_.theta_values();
    ConfidenceSet cs;
    cs.per_theta.resize(thetas.size());
    parallel_for(thetas.size(), config_.threads,
                 [&](std::size_t j) { cs.per_theta[j] = test(thetas[j]); });
    for (const auto& r : cs.per_theta)
      if (!r.reject) cs.accepted.push_back(r.theta_null);
    if (!cs.accepted.empty()) cs.hull = {cs.accepted.front(), cs.accepted.back()};
    return cs;
  }

 private:
  static void mark_active(MomentKernel::PointCache& cache, double kappa) {
    cache.eq_hardened =
        std::abs(cache.eq[0].xi) <= kappa && std::abs(cache.eq[1].xi) <= kappa;
    for (auto& r : cache.ineq) r.active = r.xi <= kappa;
  }

  // Coarse pass over y0 x p0 x p1 (with y1 = y0 + theta), keeping every
  // evaluated cache for the re-profiling route, then local refinement rounds
  // around the incumbent.
  Profile profile_with_caches(double theta_null,
                              std::vector<MomentKernel::PointCache>* coarse) const {
    const double kappa = config_.kappa_n(kernel_.n());
    const double y_step = (y_window_.second - y_window_.first) / (config_.y_grid - 1);
    const double p_step = 0.5 / (config_.p_grid - 1);
    double best = std::numeric_limits<double>::infinity();
    ParamPoint best_pt;
    coarse->reserve(static_cast<std::size_t>(config_.y_grid) * config_.p_grid * config_.p_grid);
    for (int iy = 0; iy < config_.y_grid; ++iy) {
      const double y0 = y_window_.first + y_step * iy;
      for (int i0 = 0; i0 < config_.p_grid; ++i0) {
        const double p0 = p_step * i0;
        for (int i1 = 0; i1 < config_.p_grid; ++i1) {
          const double p1 = p_step * i1;
          if (p0 + p1 >= 1.0 - 1e-12) continue;
          const ParamPoint pt{y0, y0 + theta_null, p0, p1};
          MomentKernel::PointCache cache = kernel_.make_cache(pt);
          cache.eq_hardened =
              std::abs(cache.eq[0].xi) <= kappa && std::abs(cache.eq[1].xi) <= kappa;
          if (cache.statistic < best) {
            best = cache.statistic;
            best_pt = pt;
          }
          coarse->push_back(std::move(cache));
        }
      }
    }
    double span_y = y_step, span_p = p_step;
    for (int round = 0; round < config_.refine_rounds; ++round) {
      const double step_y = span_y / config_.refine_factor;
      const double step_p = span_p / config_.refine_factor;
      const ParamPoint center = best_pt;
      for (int iy = -config_.refine_factor; iy <= config_.refine_factor; ++iy) {
        const double y0 = std::clamp(center.y0 + iy * step_y, y_window_.first, y_window_.second);
        for (int i0 = -config_.refine_factor; i0 <= config_.refine_factor; ++i0) {
          const double p0 = std::clamp(center.p0 + i0 * step_p, 0.0, 0.5);
          for (int i1 = -config_.refine_factor; i1 <= config_.refine_factor; ++i1) {
            const double p1 = std::clamp(center.p1 + i1 * step_p, 0.0, 0.5);
            if (p0 + p1 >= 1.0 - 1e-12) continue;
            const ParamPoint pt{y0, y0 + theta_null, p0, p1};
            const double s = kernel_.statistic(pt);
            if (s < best) {
              best = s;
              best_pt = pt;
            }
          }
        }
      }
      span_y = step_y;
      span_p = step_p;
    }
    return {best, best_pt};
  }

  const Dataset& dataset_;
  MomentKernel kernel_;
  InferenceConfig config_;
  std::pair<double, double> y_window_;
};

inline SubvectorTest::Profile profiled_statistic(const Dataset& ds, const MomentSpec& spec,
                                                 double theta_null, const InferenceConfig& cfg) {
  return SubvectorTest(ds, spec, cfg).profiled_statistic(theta_null);
}

inline double critical_value_min_resampling(const Dataset& ds, const MomentSpec& spec,
                                            double theta_null, const InferenceConfig& cfg) {
  return SubvectorTest(ds, spec, cfg).test(theta_null).critical_value;
}

inline TestResult run_test(const Dataset& ds, const MomentSpec& spec, double theta_null,
                           const InferenceConfig& cfg) {
  return SubvectorTest(ds, spec, cfg).test(theta_null);
}

inline ConfidenceSet confidence_interval(const Dataset& ds, const MomentSpec& spec,
                                         const InferenceConfig& cfg) {
  return SubvectorTest(ds, spec, cfg).confidence_interval();
}

}  // namespace misivqr
