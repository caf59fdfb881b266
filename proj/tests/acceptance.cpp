// Acceptance suite: end-to-end checks of the population reproductions, the
// theorem-level identities, the non-identification witness, and desk-scale
// coverage of the inference pipeline. Prints one line per criterion.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "misivqr/misivqr.hpp"

using namespace misivqr;

namespace {

void report(const char* name, bool pass, const char* detail = "") {
  std::printf("[%s] %s %s\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
}

struct Cell {
  double got;
  double want;
  bool ok(double tol = 0.01) const { return std::abs(got - want) <= tol + 1e-12; }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("criterion 1: population table reproduction") {
  // published two-decimal reference values per design: delta_q, delta_rf, set lo, set hi
  const double want[3][4] = {{0.21, 0.21, 0.21, 0.37},
                             {0.21, 0.11, 0.13, 0.37},
                             {0.21, 0.11, 0.12, 0.36}};
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = reproduce_table1(0.5, 0.005);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool all = true;
  for (int d = 0; d < 3; ++d) {
    const Cell cells[4] = {{rows[d].delta_q, want[d][0]},
                           {rows[d].delta_rf, want[d][1]},
                           {rows[d].theta_set.first, want[d][2]},
                           {rows[d].theta_set.second, want[d][3]}};
    const char* names[4] = {"delta_q", "delta_rf", "set_lo", "set_hi"};
    for (int k = 0; k < 4; ++k) {
      char detail[160];
      std::snprintf(detail, sizeof detail, "design %d %s: got %.4f want %.2f +-0.01", d + 1,
                    names[k], cells[k].got, want[d][k]);
      report("criterion 1 cell", cells[k].ok(), detail);
      all &= cells[k].ok();
      CHECK(cells[k].ok());
    }
  }
  report("criterion 1: all population cells within +-0.01", all);
  char timing[64];
  std::snprintf(timing, sizeof timing, "elapsed %.1f s", secs);
  report("criterion 1: runtime budget (<2 min)", secs < 120.0, timing);
  CHECK(secs < 120.0);
  // regression pin for the one cell that diverges from the published value:
  // the design-2 set lower endpoint computes to 0.11 under every bound rule
  // this library implements (see the bound-rule discussion in the README)
  CHECK(rows[1].theta_set.first == Catch::Approx(0.11).margin(0.005));
}

TEST_CASE("criterion 2: testable-implication residuals") {
  bool all = true;
  for (int d : {1, 2, 3}) {
    for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const auto res = verify_testable_implication(StructuralModel::design(d), tau);
      all &= std::abs(res[0]) < 1e-8 && std::abs(res[1]) < 1e-8;
      REQUIRE(std::abs(res[0]) < 1e-8);
      REQUIRE(std::abs(res[1]) < 1e-8);
    }
  }
  report("criterion 2: testable implication residuals < 1e-8", all);
}

TEST_CASE("criterion 3: attenuation suite") {
  bool all = true;
  // sandwich and kappa in [0,1] for 100 random stochastically monotone models
  SplitRng rng(20260809, 0);
  int checked = 0;
  while (checked < 100) {
    StructuralModel m;
    m.q = rng.next_double() < 0.5 ? QuantileMap::sqrt_linear() : QuantileMap::square();
    m.rho = -0.9 + 1.8 * rng.next_double();
    m.gamma = 0.5 * rng.next_double();
    m.p0 = m.p1 = 0.25;
    if (!check_stochastic_monotonicity(m, 401).monotone) continue;
    ++checked;
    PopulationDistribution pop(m);
    for (int z : {0, 1}) {
      const double q = pop.quantile_y(0.5, z);
      const bool sandwich = q >= std::min(m.q.value(0, 0.5), m.q.value(1, 0.5)) - 1e-9 &&
                            q <= std::max(m.q.value(0, 0.5), m.q.value(1, 0.5)) + 1e-9;
      all &= sandwich;
      REQUIRE(sandwich);
    }
    const auto att = attenuation_kappa(m, 0.5);
    REQUIRE(att.kappa.has_value());
    REQUIRE(*att.kappa >= -1e-9);
    REQUIRE(*att.kappa <= 1.0 + 1e-9);
    all &= *att.kappa >= -1e-9 && *att.kappa <= 1.0 + 1e-9;
  }
  // oracle: design-2 reduced-form quantiles solve (1-pi) y + pi y^2 = tau
  const auto quad_root = [](double pi, double tau) {
    return (-(1.0 - pi) + std::sqrt((1.0 - pi) * (1.0 - pi) + 4.0 * pi * tau)) / (2.0 * pi);
  };
  const double kappa2_oracle =
      (quad_root(0.75, 0.5) - quad_root(0.25, 0.5)) / (std::sqrt(0.5) - 0.5);
  const auto k1 = attenuation_kappa(StructuralModel::design(1), 0.5);
  const auto k2 = attenuation_kappa(StructuralModel::design(2), 0.5);
  REQUIRE(*k1.kappa == Catch::Approx(1.0).margin(1e-3));
  REQUIRE(*k2.kappa == Catch::Approx(kappa2_oracle).margin(1e-6));
  REQUIRE(*k2.kappa == Catch::Approx(0.508).margin(1e-2));
  all &= std::abs(*k1.kappa - 1.0) < 1e-3 && std::abs(*k2.kappa - 0.508) < 1e-2;
  report("criterion 3: sandwich + kappa bounds + design values", all);
}

TEST_CASE("criterion 4: non-identification witness") {
  StructuralModel demo;
  demo.q = QuantileMap::square();
  demo.rho = 0.0;
  demo.gamma = 0.25;
  demo.p0 = demo.p1 = 0.25;
  const PerturbedModel pm = construct_perturbation(demo, 0.1, 0, 0.5);
  const double sup = verify_observational_equivalence(demo, pm);
  const double shift = std::abs(pm.q_tilde(0, 0.5) - demo.q.value(0, 0.5));
  REQUIRE(sup < 1e-6);
  REQUIRE(shift == Catch::Approx(0.05).margin(1e-9));
  report("criterion 4: sup-distance < 1e-6 with quantile shift 0.05", sup < 1e-6);
}

TEST_CASE("criterion 5: equality moments vanish at the generating point") {
  bool all = true;
  for (int d : {1, 2, 3}) {
    const StructuralModel m = StructuralModel::design(d);
    const Dataset ds = sample_dataset(m, 100000, 6000 + d);
    const MomentSpec spec = build_moment_spec(ds, 0.5, 4);
    const MomentEvaluation ev =
        evaluate_moments(ds, spec, ParamPoint{0.5, std::sqrt(0.5), 0.25, 0.25});
    double max_sd = 0.0;
    for (int j = 0; j < ev.equality_rows(); ++j) max_sd = std::max(max_sd, ev.sds[j]);
    const double tol = 3.0 / std::sqrt(static_cast<double>(ev.n)) * max_sd;
    for (int j = 0; j < ev.equality_rows(); ++j) {
      REQUIRE(std::abs(ev.means[j]) <= tol);
      all &= std::abs(ev.means[j]) <= tol;
    }
  }
  report("criterion 5: equality moment vanishing at n=1e5", all);
}

TEST_CASE("criterion 6: desk-scale coverage") {
  const auto t0 = std::chrono::steady_clock::now();
  InferenceConfig cfg;
  cfg.alpha = 0.10;
  cfg.b_reps = 500;
  bool all = true;
  const double theta_pop = std::sqrt(0.5) - 0.5;
  for (int d : {1, 2, 3}) {
    PopulationDistribution pop(StructuralModel::design(d));
    const IdentifiedSet set = identified_set(pop, 0.5, {0.0, 1.0}, 0.01);
    const double theta_out = set.theta_interval->second + 0.2;
    const CoverageCurve curve =
        run_coverage(d, 1000, 200, {theta_pop, theta_out}, cfg, 424200 + d, 0);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "design %d: coverage(theta_pop)=%.3f coverage(theta_out)=%.3f", d,
                  curve.coverage[0], curve.coverage[1]);
    const bool ok = curve.coverage[0] >= 0.85 && curve.coverage[1] < curve.coverage[0];
    report("criterion 6", ok, detail);
    CHECK(curve.coverage[0] >= 0.85);
    CHECK(curve.coverage[1] < curve.coverage[0]);
    all &= ok;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[64];
  std::snprintf(detail, sizeof detail, "elapsed %.0f s", secs);
  report("criterion 6: coverage at truth >= 0.85 and power direction", all, detail);
  CHECK(secs < 7200.0);
}

TEST_CASE("criterion 7: manifest determinism") {
  const std::string cli = MISIVQR_CLI_PATH;
  auto sh = [&](const std::string& args) {
    return std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
  };
  REQUIRE(sh("simulate --design 2 --n 400 --seed 99 --out acc_a.csv") == 0);
  REQUIRE(sh("simulate --config acc_a.csv.manifest.json --out acc_b.csv") == 0);
  const bool sim_same = slurp("acc_a.csv") == slurp("acc_b.csv");
  REQUIRE(sim_same);

  REQUIRE(sh("infer --data acc_a.csv --seed 3 --b-reps 120 --theta-lo 0.1 --theta-hi 0.3 "
             "--theta-step 0.1 --y-grid 11 --p-grid 6 --refine-rounds 1 --out acc_i.json "
             "--csv acc_i.csv") == 0);
  REQUIRE(sh("infer --config acc_i.json.manifest.json --out acc_j.json --csv acc_j.csv") == 0);
  const bool inf_same = slurp("acc_i.csv") == slurp("acc_j.csv");
  REQUIRE(inf_same);

  REQUIRE(sh("population --design 1 --step 0.02 --out acc_p.json") == 0);
  REQUIRE(sh("population --config acc_p.json.manifest.json --out acc_q.json") == 0);
  const bool pop_same = slurp("acc_p.json") == slurp("acc_q.json");
  REQUIRE(pop_same);
  report("criterion 7: byte-identical reruns from manifests", sim_same && inf_same && pop_same);
}
