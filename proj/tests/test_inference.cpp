#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "misivqr/inference.hpp"

using namespace misivqr;

namespace {

InferenceConfig fast_config(std::uint64_t seed) {
  InferenceConfig cfg;
  cfg.alpha = 0.10;
  cfg.b_reps = 120;
  cfg.y_grid = 21;
  cfg.p_grid = 11;
  cfg.refine_rounds = 1;
  cfg.seed = seed;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  InferenceConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = InferenceConfig{};
  cfg.b_reps = 50;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = InferenceConfig{};
  REQUIRE(cfg.kappa_n(1000) == Catch::Approx(std::sqrt(std::log(1000.0))));
  nlohmann::json j = cfg;
  const auto back = j.get<InferenceConfig>();
  REQUIRE(back.alpha == cfg.alpha);
  REQUIRE(back.b_reps == cfg.b_reps);
}

TEST_CASE("bootstrap quantile edge cases") {
  std::vector<double> draws = {3.0, 1.0, 2.0, 4.0};
  REQUIRE(detail::bootstrap_quantile(draws, 0.0) == 0.0);
  REQUIRE(detail::bootstrap_quantile(draws, -0.5) == 0.0);   // alpha -> 1 limit
  REQUIRE(detail::bootstrap_quantile(draws, 0.5) == 2.0);
  REQUIRE(detail::bootstrap_quantile(draws, 1.0) == 4.0);
  REQUIRE(detail::bootstrap_quantile(draws, 0.9) == 4.0);
}

TEST_CASE("profiled statistic minimizes over the probed grid") {
  const Dataset ds = sample_dataset(StructuralModel::design(2), 400, 31);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  const InferenceConfig cfg = fast_config(5);
  SubvectorTest test(ds, spec, cfg);
  const auto prof = test.profiled_statistic(0.2);
  REQUIRE(prof.statistic >= 0.0);
  REQUIRE(prof.statistic <= test.kernel().statistic(prof.argmin) + 1e-12);
  // no probed point can beat the reported minimum
  const MomentKernel& kernel = test.kernel();
  for (double y0 : {0.1, 0.3, 0.5, 0.7}) {
    for (double p0 : {0.0, 0.25, 0.5}) {
      for (double p1 : {0.0, 0.25}) {
        const ParamPoint pt{y0, y0 + 0.2, p0, p1};
        REQUIRE(kernel.statistic(pt) >= prof.statistic - 1e-9);
      }
    }
  }
}

TEST_CASE("gross violations of the moment system are rejected") {
  const Dataset ds = sample_dataset(StructuralModel::design(1), 1000, 77);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  const InferenceConfig cfg = fast_config(7);
  SubvectorTest test(ds, spec, cfg);
  const TestResult at_truth = test.test(std::sqrt(0.5) - 0.5);
  const TestResult far_off = test.test(0.9);
  REQUIRE_FALSE(at_truth.reject);
  REQUIRE(far_off.reject);
  REQUIRE(far_off.statistic > 5.0 * std::max(far_off.critical_value, 1.0));
}

TEST_CASE("min resampling critical value never exceeds the discard route") {
  const Dataset ds = sample_dataset(StructuralModel::design(2), 500, 13);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  SubvectorTest test(ds, spec, fast_config(3));
  for (double theta : {0.1, 0.2, 0.4}) {
    const TestResult r = test.test(theta);
    REQUIRE(r.critical_value <= r.critical_value_discard + 1e-12);
    REQUIRE(r.critical_value >= 0.0);
  }
}

TEST_CASE("identical inputs give identical results") {
  const Dataset ds = sample_dataset(StructuralModel::design(3), 300, 99);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  const InferenceConfig cfg = fast_config(11);
  const TestResult a = run_test(ds, spec, 0.25, cfg);
  const TestResult b = run_test(ds, spec, 0.25, cfg);
  REQUIRE(a.statistic == b.statistic);
  REQUIRE(a.critical_value == b.critical_value);
  REQUIRE(a.reject == b.reject);
  REQUIRE(a.minimizer.y0 == b.minimizer.y0);
  InferenceConfig other = cfg;
  other.seed = 12;
  const TestResult c = run_test(ds, spec, 0.25, other);
  REQUIRE(a.critical_value != c.critical_value);
}

TEST_CASE("results do not depend on the thread count") {
  const Dataset ds = sample_dataset(StructuralModel::design(2), 300, 55);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  InferenceConfig cfg = fast_config(21);
  cfg.theta_lo = 0.0;
  cfg.theta_hi = 0.4;
  cfg.theta_step = 0.1;
  cfg.threads = 1;
  const ConfidenceSet a = confidence_interval(ds, spec, cfg);
  cfg.threads = 2;
  const ConfidenceSet b = confidence_interval(ds, spec, cfg);
  REQUIRE(a.accepted == b.accepted);
  for (std::size_t i = 0; i < a.per_theta.size(); ++i) {
    REQUIRE(a.per_theta[i].statistic == b.per_theta[i].statistic);
    REQUIRE(a.per_theta[i].critical_value == b.per_theta[i].critical_value);
  }
}

TEST_CASE("acceptance regions nest in alpha at fixed draws") {
  const Dataset ds = sample_dataset(StructuralModel::design(2), 400, 61);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  InferenceConfig tight = fast_config(8);
  tight.alpha = 0.5;
  InferenceConfig loose = fast_config(8);
  loose.alpha = 0.05;
  tight.theta_lo = loose.theta_lo = 0.0;
  tight.theta_hi = loose.theta_hi = 0.5;
  tight.theta_step = loose.theta_step = 0.05;
  const ConfidenceSet narrow = confidence_interval(ds, spec, tight);
  const ConfidenceSet wide = confidence_interval(ds, spec, loose);
  for (double t : narrow.accepted)
    REQUIRE(std::find(wide.accepted.begin(), wide.accepted.end(), t) != wide.accepted.end());
  if (narrow.hull) {
    REQUIRE(wide.hull);
    REQUIRE(wide.hull->first <= narrow.hull->first + 1e-12);
    REQUIRE(wide.hull->second >= narrow.hull->second - 1e-12);
  }
}

TEST_CASE("pure-noise treatment pushes the minimizer to the boundary without crashing") {
  // D carries no information: p0 + p1 close to the unit boundary.
  Dataset ds;
  SplitRng rng(500, 0);
  for (int i = 0; i < 400; ++i) {
    const double y = rng.next_double();
    ds.obs.push_back({y, rng.next_double() < 0.5 ? 1 : 0, i % 2});
  }
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  SubvectorTest test(ds, spec, fast_config(2));
  const auto prof = test.profiled_statistic(0.1);
  REQUIRE(std::isfinite(prof.statistic));
  REQUIRE(prof.argmin.p0 + prof.argmin.p1 < 1.0);
  REQUIRE_NOTHROW(test.test(0.1));
}

TEST_CASE("halving the theta step moves the hull by at most one old step") {
  const Dataset ds = sample_dataset(StructuralModel::design(2), 400, 71);
  const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
  InferenceConfig coarse = fast_config(4);
  coarse.theta_lo = 0.0;
  coarse.theta_hi = 0.5;
  coarse.theta_step = 0.1;
  InferenceConfig fine = coarse;
  fine.theta_step = 0.05;
  const ConfidenceSet a = confidence_interval(ds, spec, coarse);
  const ConfidenceSet b = confidence_interval(ds, spec, fine);
  REQUIRE(a.hull);
  REQUIRE(b.hull);
  REQUIRE(std::abs(a.hull->first - b.hull->first) <= 0.1 + 1e-12);
  REQUIRE(std::abs(a.hull->second - b.hull->second) <= 0.1 + 1e-12);
  // the fine grid contains the coarse points, so decisions there coincide
  for (double t : a.accepted)
    REQUIRE(std::find(b.accepted.begin(), b.accepted.end(), t) != b.accepted.end());
}
