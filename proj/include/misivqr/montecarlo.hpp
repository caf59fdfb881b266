#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "misivqr/bounds.hpp"
#include "misivqr/identify.hpp"
#include "misivqr/inference.hpp"
#include "misivqr/parallel.hpp"

namespace misivqr {

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_fingerprint(const nlohmann::json& j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

struct Table1Row {
  int design = 0;
  double delta_q = 0.0;
  double delta_rf = 0.0;
  std::pair<double, double> theta_set{0.0, 0.0};
};

inline void to_json(nlohmann::json& j, const Table1Row& r) {
  j = nlohmann::json{{"design", r.design},
                     {"delta_q", r.delta_q},
                     {"delta_rf", r.delta_rf},
                     {"theta_set", {r.theta_set.first, r.theta_set.second}}};
}

// Population quantities per design at tau = 0.5: structural QTE, reduced-form
// QTE, and the projected theta-interval of the identified set.
inline Table1Row population_summary(int design_id, double tau = 0.5, double grid_step = 0.005,
                                    PBoundRule rule = PBoundRule::InstrumentCells) {
  const StructuralModel m = StructuralModel::design(design_id);
  PopulationDistribution pop(m);
  Table1Row row;
  row.design = design_id;
  row.delta_q = m.q.value(1, tau) - m.q.value(0, tau);
  row.delta_rf = reduced_form_qte(pop, tau);
  const IdentifiedSet set = identified_set(pop, tau, {0.0, 1.0}, grid_step, rule);
  if (!set.theta_interval) throw std::runtime_error("population_summary: empty identified set");
  row.theta_set = *set.theta_interval;
  return row;
}

inline std::vector<Table1Row> reproduce_table1(double tau = 0.5, double grid_step = 0.005,
                                               PBoundRule rule = PBoundRule::InstrumentCells) {
  std::vector<Table1Row> rows;
  for (int d : {1, 2, 3}) rows.push_back(population_summary(d, tau, grid_step, rule));
  return rows;
}

struct CoverageCurve {
  std::vector<double> theta;
  std::vector<double> coverage;
  int reps = 0;
  std::size_t n = 0;
  double alpha = 0.10;
  int design = 0;
  std::string fingerprint;
};

inline void to_json(nlohmann::json& j, const CoverageCurve& c) {
  j = nlohmann::json{{"theta", c.theta},     {"coverage", c.coverage}, {"reps", c.reps},
                     {"n", c.n},             {"alpha", c.alpha},       {"design", c.design},
                     {"fingerprint", c.fingerprint}};
}

inline std::string coverage_to_csv(const CoverageCurve& c) {
  std::string out = "theta,coverage,reps,n,alpha,design,fingerprint\n";
  char buf[192];
  for (std::size_t i = 0; i < c.theta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%zu,%.17g,%d,%s\n", c.theta[i], c.coverage[i],
                  c.reps, c.n, c.alpha, c.design, c.fingerprint.c_str());
    out += buf;
  }
  return out;
}

namespace detail {
inline constexpr std::uint64_t kCoverageDataTag = 0xDA7Aull;
inline constexpr std::uint64_t kCoverageInfTag = 0x1BFull;
}  // namespace detail

// Coverage of the test-inversion confidence set at each theta on the grid,
// over `reps` fresh samples of size n. Replications run in parallel on
// deterministic per-replication substreams; acceptance is tallied in
// integers so the aggregation order cannot perturb the result.
inline CoverageCurve run_coverage(int design_id, std::size_t n, int reps,
                                  const std::vector<double>& theta_grid, InferenceConfig config,
                                  std::uint64_t master_seed, int threads = 0, int n_bins = 4,
                                  double tau = 0.5) {
  if (reps < 1) throw std::invalid_argument("run_coverage: reps must be >= 1");
  const StructuralModel model = StructuralModel::design(design_id);
  CoverageCurve curve;
  curve.theta = theta_grid;
  curve.reps = reps;
  curve.n = n;
  curve.alpha = config.alpha;
  curve.design = design_id;

  nlohmann::json meta;
  to_json(meta, config);
  meta["design"] = design_id;
  meta["n"] = n;
  meta["reps"] = reps;
  meta["n_bins"] = n_bins;
  meta["tau"] = tau;
  meta["master_seed"] = master_seed;
  meta["theta_grid"] = theta_grid;
  curve.fingerprint = config_fingerprint(meta);

  std::vector<std::vector<int>> accept(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    const Dataset ds =
        sample_dataset(model, n, derive_seed(master_seed, detail::kCoverageDataTag, r));
    const MomentSpec spec = build_moment_spec(ds, tau, n_bins);
    InferenceConfig cfg = config;
    cfg.seed = derive_seed(master_seed, detail::kCoverageInfTag, r);
    cfg.threads = 1;
    SubvectorTest test(ds, spec, cfg);
    auto& row = accept[r];
    row.resize(theta_grid.size(), 0);
    for (std::size_t j = 0; j < theta_grid.size(); ++j)
      row[j] = test.test(theta_grid[j]).reject ? 0 : 1;
  });

  curve.coverage.assign(theta_grid.size(), 0.0);
  for (std::size_t j = 0; j < theta_grid.size(); ++j) {
    long tally = 0;
    for (int r = 0; r < reps; ++r) tally += accept[static_cast<std::size_t>(r)][j];
    curve.coverage[j] = static_cast<double>(tally) / static_cast<double>(reps);
  }
  return curve;
}

}  // namespace misivqr
