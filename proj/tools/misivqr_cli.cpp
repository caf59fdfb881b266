// misivqr command-line front end: reproducible simulation, population
// summaries, identified sets, subvector inference and coverage studies.
//
// Every command merges flags over an optional --config JSON (flags win),
// writes a manifest describing the effective configuration, and can be
// rerun from that manifest to regenerate byte-identical outputs.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "misivqr/misivqr.hpp"

using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  f >> j;
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
}

// Config file contents for a subcommand; accepts either a bare flag map or a
// manifest produced by an earlier run (its "config" object is used).
json load_config(const std::string& path, const std::string& command) {
  json j = read_json_file(path);
  if (j.contains("config")) {
    if (j.contains("command") && j["command"] != command)
      throw std::invalid_argument("config file was produced by command '" +
                                  j["command"].get<std::string>() + "', not '" + command + "'");
    return j["config"];
  }
  return j;
}

struct CommandIo {
  std::string command;
  json config;           // effective flag map (config file merged with CLI)
  std::string manifest_path;
  std::vector<std::string> outputs;

  // Output routing does not define the computation: two runs that differ only
  // in where they write must carry the same hash (and identical payloads).
  std::string manifest_hash() const {
    json core = config;
    for (const char* k : {"out", "csv", "summary", "manifest", "threads"}) core.erase(k);
    json wrapped{{"command", command}, {"config", core}, {"artifact_version", misivqr::kVersion}};
    return misivqr::config_fingerprint(wrapped);
  }

  void write_manifest() const {
    if (manifest_path.empty()) return;
    json m{{"command", command},
           {"config", config},
           {"artifact_version", misivqr::kVersion},
           {"outputs", outputs},
           {"manifest_hash", manifest_hash()}};
    write_text_file(manifest_path, m.dump(2) + "\n");
  }
};

int env_threads() {
  const char* v = std::getenv("MISIVQR_THREADS");
  if (!v) return 0;
  return std::max(0, std::atoi(v));
}

// Flag merge helper: CLI-provided options are layered over the config file.
class FlagMerger {
 public:
  explicit FlagMerger(json file_config) : merged_(std::move(file_config)) {
    if (!merged_.is_object()) merged_ = json::object();
  }

  template <typename T>
  void set_if(CLI::Option* opt, const char* key, const T& value) {
    if (opt->count() > 0) merged_[key] = value;
  }

  template <typename T>
  T get(const char* key, const T& fallback) const {
    return merged_.value(key, fallback);
  }

  bool has(const char* key) const { return merged_.contains(key); }
  const json& merged() const { return merged_; }
  json& merged() { return merged_; }

 private:
  json merged_;
};

misivqr::StructuralModel model_from_config(const FlagMerger& cfg) {
  misivqr::StructuralModel m;
  if (cfg.has("design")) {
    m = misivqr::StructuralModel::design(cfg.get<int>("design", 1));
  } else {
    m.q = misivqr::QuantileMap::from_name(cfg.get<std::string>("family", "sqrt_linear"),
                                          cfg.get<double>("a", 0.0), cfg.get<double>("b", 1.0));
    m.p0 = m.p1 = 0.0;
  }
  if (cfg.has("family"))
    m.q = misivqr::QuantileMap::from_name(cfg.get<std::string>("family", "sqrt_linear"),
                                          cfg.get<double>("a", 0.0), cfg.get<double>("b", 1.0));
  if (cfg.has("rho")) m.rho = cfg.get<double>("rho", 0.0);
  if (cfg.has("gamma")) m.gamma = cfg.get<double>("gamma", 0.25);
  if (cfg.has("p0")) m.p0 = cfg.get<double>("p0", 0.0);
  if (cfg.has("p1")) m.p1 = cfg.get<double>("p1", 0.0);
  if (cfg.has("z_prob1")) {
    const double p = cfg.get<double>("z_prob1", 0.5);
    m.z_probs = {1.0 - p, p};
  }
  m.validate();
  return m;
}

void add_model_flags(CLI::App* cmd, std::optional<int>& design, std::string& family, double& a,
                     double& b, double& rho, double& gamma, double& p0, double& p1,
                     double& z_prob1) {
  cmd->add_option("--design", design, "preset design id (1, 2 or 3)");
  cmd->add_option("--family", family, "quantile family: sqrt_linear, square, affine");
  cmd->add_option("--a", a, "affine intercept");
  cmd->add_option("--b", b, "affine slope");
  cmd->add_option("--rho", rho, "copula correlation in (-1,1)");
  cmd->add_option("--gamma", gamma, "instrument strength in [-0.5,0.5]");
  cmd->add_option("--p0", p0, "misclassification rate P(D!=D*|D*=0)");
  cmd->add_option("--p1", p1, "misclassification rate P(D!=D*|D*=1)");
  cmd->add_option("--z-prob1", z_prob1, "P(Z=z1), default 0.5");
}

struct ModelFlagVars {
  std::optional<int> design;
  std::string family = "sqrt_linear";
  double a = 0.0, b = 1.0, rho = 0.0, gamma = 0.25, p0 = 0.0, p1 = 0.0, z_prob1 = 0.5;

  void merge(CLI::App* cmd, FlagMerger& cfg) const {
    cfg.set_if(cmd->get_option("--design"), "design", design ? *design : 0);
    cfg.set_if(cmd->get_option("--family"), "family", family);
    cfg.set_if(cmd->get_option("--a"), "a", a);
    cfg.set_if(cmd->get_option("--b"), "b", b);
    cfg.set_if(cmd->get_option("--rho"), "rho", rho);
    cfg.set_if(cmd->get_option("--gamma"), "gamma", gamma);
    cfg.set_if(cmd->get_option("--p0"), "p0", p0);
    cfg.set_if(cmd->get_option("--p1"), "p1", p1);
    cfg.set_if(cmd->get_option("--z-prob1"), "z_prob1", z_prob1);
  }
};

misivqr::PBoundRule bound_rule_from(const std::string& name) {
  if (name == "instrument") return misivqr::PBoundRule::InstrumentCells;
  if (name == "pointwise") return misivqr::PBoundRule::PointwiseDensity;
  throw std::invalid_argument("unknown bound rule '" + name + "' (use instrument or pointwise)");
}

long long require_seed(const FlagMerger& cfg) {
  if (!cfg.has("seed"))
    throw std::invalid_argument("--seed is required (batch runs must be replayable)");
  const long long s = cfg.get<long long>("seed", 0);
  if (s < 0) throw std::invalid_argument("--seed must be nonnegative");
  return s;
}

misivqr::InferenceConfig inference_config_from(const FlagMerger& cfg, std::uint64_t seed,
                                               int threads) {
  misivqr::InferenceConfig ic;
  ic.alpha = cfg.get<double>("alpha", 0.10);
  ic.b_reps = cfg.get<int>("b_reps", 500);
  ic.kappa_scale = cfg.get<double>("kappa_scale", 1.0);
  ic.theta_lo = cfg.get<double>("theta_lo", -0.2);
  ic.theta_hi = cfg.get<double>("theta_hi", 0.8);
  ic.theta_step = cfg.get<double>("theta_step", 0.02);
  ic.y_grid = cfg.get<int>("y_grid", 41);
  ic.p_grid = cfg.get<int>("p_grid", 21);
  ic.refine_rounds = cfg.get<int>("refine_rounds", 2);
  ic.refine_factor = cfg.get<int>("refine_factor", 5);
  ic.seed = seed;
  ic.threads = threads;
  ic.validate();
  return ic;
}

void emit(const json& j, const std::string& out_path, CommandIo& io) {
  json payload = j;
  payload["manifest_hash"] = io.manifest_hash();
  const std::string text = payload.dump(2) + "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
    io.outputs.push_back(out_path);
  }
}

int cmd_simulate(CLI::App* cmd, const std::string& config_path, ModelFlagVars& mv,
                 long long n_flag, long long seed_flag, std::string out, std::string manifest) {
  FlagMerger cfg(config_path.empty() ? json::object() : load_config(config_path, "simulate"));
  mv.merge(cmd, cfg);
  cfg.set_if(cmd->get_option("--n"), "n", n_flag);
  cfg.set_if(cmd->get_option("--seed"), "seed", seed_flag);
  cfg.set_if(cmd->get_option("--out"), "out", out);

  const auto model = model_from_config(cfg);
  const long long n = cfg.get<long long>("n", 1000);
  if (n < 1) throw std::invalid_argument("--n must be >= 1");
  const long long seed = require_seed(cfg);
  const std::string out_path = cfg.get<std::string>("out", "");
  if (out_path.empty()) throw std::invalid_argument("--out is required");

  CommandIo io{"simulate", cfg.merged(), manifest.empty() ? out_path + ".manifest.json" : manifest, {}};
  const auto ds = misivqr::sample_dataset(model, static_cast<std::size_t>(n),
                                          static_cast<std::uint64_t>(seed));
  misivqr::write_dataset_csv(ds, out_path);
  io.outputs.push_back(out_path);
  io.write_manifest();
  std::fprintf(stderr, "wrote %lld observations to %s\n", n, out_path.c_str());
  return 0;
}

int cmd_population(CLI::App* cmd, const std::string& config_path, ModelFlagVars& mv, double tau,
                   double step, double wlo, double whi, std::string rule, std::string out,
                   std::string manifest, bool identify_only, std::string csv_path) {
  const char* name = identify_only ? "identify" : "population";
  FlagMerger cfg(config_path.empty() ? json::object() : load_config(config_path, name));
  mv.merge(cmd, cfg);
  cfg.set_if(cmd->get_option("--tau"), "tau", tau);
  cfg.set_if(cmd->get_option("--step"), "step", step);
  cfg.set_if(cmd->get_option("--window-lo"), "window_lo", wlo);
  cfg.set_if(cmd->get_option("--window-hi"), "window_hi", whi);
  cfg.set_if(cmd->get_option("--bound-rule"), "bound_rule", rule);
  cfg.set_if(cmd->get_option("--out"), "out", out);
  if (identify_only && cmd->get_option("--csv")->count() > 0) cfg.merged()["csv"] = csv_path;

  const auto model = model_from_config(cfg);
  const double tau_eff = cfg.get<double>("tau", 0.5);
  const double step_eff = cfg.get<double>("step", 0.005);
  const auto rule_eff = bound_rule_from(cfg.get<std::string>("bound_rule", "instrument"));
  const std::pair<double, double> window{cfg.get<double>("window_lo", 0.0),
                                         cfg.get<double>("window_hi", 1.0)};
  const std::string out_path = cfg.get<std::string>("out", "-");

  CommandIo io{name, cfg.merged(),
               manifest.empty() ? (out_path == "-" || out_path.empty() ? "" : out_path + ".manifest.json")
                                : manifest,
               {}};

  misivqr::PopulationDistribution pop(model);
  const auto set = misivqr::identified_set(pop, tau_eff, window, step_eff, rule_eff);

  json result;
  result["model"] = model;
  result["tau"] = tau_eff;
  result["identified_set"] = set;
  if (!identify_only) {
    const auto att = misivqr::attenuation_kappa(model, tau_eff);
    result["delta_q"] = att.delta_q;
    result["delta_rf"] = att.delta_rf;
    result["kappa"] = att.kappa ? json(*att.kappa) : json(nullptr);
  }
  if (identify_only && cfg.has("csv")) {
    const std::string csv_out = cfg.get<std::string>("csv", "");
    write_text_file(csv_out, misivqr::identified_set_to_csv(set));
    io.outputs.push_back(csv_out);
  }
  emit(result, out_path, io);
  io.write_manifest();
  return 0;
}

int cmd_infer(CLI::App* cmd, const std::string& config_path, std::string data, double tau,
              int n_bins, long long seed_flag, int threads_flag, std::string out,
              std::string csv_path, std::string manifest, misivqr::InferenceConfig& ic_flags) {
  FlagMerger cfg(config_path.empty() ? json::object() : load_config(config_path, "infer"));
  cfg.set_if(cmd->get_option("--data"), "data", data);
  cfg.set_if(cmd->get_option("--tau"), "tau", tau);
  cfg.set_if(cmd->get_option("--n-bins"), "n_bins", n_bins);
  cfg.set_if(cmd->get_option("--seed"), "seed", seed_flag);
  cfg.set_if(cmd->get_option("--alpha"), "alpha", ic_flags.alpha);
  cfg.set_if(cmd->get_option("--b-reps"), "b_reps", ic_flags.b_reps);
  cfg.set_if(cmd->get_option("--kappa-scale"), "kappa_scale", ic_flags.kappa_scale);
  cfg.set_if(cmd->get_option("--theta-lo"), "theta_lo", ic_flags.theta_lo);
  cfg.set_if(cmd->get_option("--theta-hi"), "theta_hi", ic_flags.theta_hi);
  cfg.set_if(cmd->get_option("--theta-step"), "theta_step", ic_flags.theta_step);
  cfg.set_if(cmd->get_option("--y-grid"), "y_grid", ic_flags.y_grid);
  cfg.set_if(cmd->get_option("--p-grid"), "p_grid", ic_flags.p_grid);
  cfg.set_if(cmd->get_option("--refine-rounds"), "refine_rounds", ic_flags.refine_rounds);
  cfg.set_if(cmd->get_option("--out"), "out", out);
  if (cmd->get_option("--csv")->count() > 0) cfg.merged()["csv"] = csv_path;

  const std::string data_path = cfg.get<std::string>("data", "");
  if (data_path.empty()) throw std::invalid_argument("--data is required");
  std::ifstream probe(data_path);
  if (!probe) throw std::invalid_argument("cannot open dataset: " + data_path);
  probe.close();

  const double tau_eff = cfg.get<double>("tau", 0.5);
  const int bins = cfg.get<int>("n_bins", 4);
  const long long seed = require_seed(cfg);
  const int threads = threads_flag > 0 ? threads_flag : env_threads();
  const auto ic = inference_config_from(cfg, static_cast<std::uint64_t>(seed), threads);

  const auto ds = misivqr::read_dataset_csv(data_path);
  const auto spec = misivqr::build_moment_spec(ds, tau_eff, bins);
  const auto cs = misivqr::confidence_interval(ds, spec, ic);

  const std::string out_path = cfg.get<std::string>("out", "-");
  CommandIo io{"infer", cfg.merged(),
               manifest.empty() ? (out_path == "-" || out_path.empty() ? "" : out_path + ".manifest.json")
                                : manifest,
               {}};
  json result;
  result["data"] = data_path;
  result["tau"] = tau_eff;
  result["n_bins"] = bins;
  result["n"] = ds.size();
  result["inference"] = ic;
  result["confidence_set"] = cs;
  if (cfg.has("csv")) {
    const std::string csv_out = cfg.get<std::string>("csv", "");
    write_text_file(csv_out, misivqr::confidence_set_to_csv(cs));
    io.outputs.push_back(csv_out);
  }
  emit(result, out_path, io);
  io.write_manifest();
  return 0;
}

int cmd_coverage(CLI::App* cmd, const std::string& config_path, int design, long long n, int reps,
                 double tau, int n_bins, long long seed_flag, int threads_flag, std::string out,
                 std::string summary, std::string manifest, misivqr::InferenceConfig& ic_flags) {
  FlagMerger cfg(config_path.empty() ? json::object() : load_config(config_path, "coverage"));
  cfg.set_if(cmd->get_option("--design"), "design", design);
  cfg.set_if(cmd->get_option("--n"), "n", n);
  cfg.set_if(cmd->get_option("--reps"), "reps", reps);
  cfg.set_if(cmd->get_option("--tau"), "tau", tau);
  cfg.set_if(cmd->get_option("--n-bins"), "n_bins", n_bins);
  cfg.set_if(cmd->get_option("--seed"), "seed", seed_flag);
  cfg.set_if(cmd->get_option("--alpha"), "alpha", ic_flags.alpha);
  cfg.set_if(cmd->get_option("--b-reps"), "b_reps", ic_flags.b_reps);
  cfg.set_if(cmd->get_option("--theta-lo"), "theta_lo", ic_flags.theta_lo);
  cfg.set_if(cmd->get_option("--theta-hi"), "theta_hi", ic_flags.theta_hi);
  cfg.set_if(cmd->get_option("--theta-step"), "theta_step", ic_flags.theta_step);
  cfg.set_if(cmd->get_option("--y-grid"), "y_grid", ic_flags.y_grid);
  cfg.set_if(cmd->get_option("--p-grid"), "p_grid", ic_flags.p_grid);
  cfg.set_if(cmd->get_option("--refine-rounds"), "refine_rounds", ic_flags.refine_rounds);
  cfg.set_if(cmd->get_option("--out"), "out", out);
  if (cmd->get_option("--summary")->count() > 0) cfg.merged()["summary"] = summary;

  const int design_eff = cfg.get<int>("design", 1);
  const long long n_eff = cfg.get<long long>("n", 1000);
  const int reps_eff = cfg.get<int>("reps", 200);
  const double tau_eff = cfg.get<double>("tau", 0.5);
  const int bins = cfg.get<int>("n_bins", 4);
  const long long seed = require_seed(cfg);
  const int threads = threads_flag > 0 ? threads_flag : env_threads();
  const std::string out_path = cfg.get<std::string>("out", "");
  if (out_path.empty()) throw std::invalid_argument("--out is required");
  if (reps_eff > 500)
    std::fprintf(stderr, "note: %d replications with a bootstrap per grid point is hours-scale\n",
                 reps_eff);

  auto ic = inference_config_from(cfg, 0, 1);
  const auto thetas = ic.theta_values();
  const auto curve = misivqr::run_coverage(design_eff, static_cast<std::size_t>(n_eff), reps_eff,
                                           thetas, ic, static_cast<std::uint64_t>(seed), threads,
                                           bins, tau_eff);

  CommandIo io{"coverage", cfg.merged(), manifest.empty() ? out_path + ".manifest.json" : manifest, {}};
  write_text_file(out_path, misivqr::coverage_to_csv(curve));
  io.outputs.push_back(out_path);
  if (cfg.has("summary")) {
    const std::string sum_path = cfg.get<std::string>("summary", "");
    json j = curve;
    emit(j, sum_path, io);
  }
  io.write_manifest();
  return 0;
}

int cmd_perturb(CLI::App* cmd, const std::string& config_path, ModelFlagVars& mv, double eps,
                int dbar, double tau, std::string out, std::string manifest) {
  FlagMerger cfg(config_path.empty() ? json::object() : load_config(config_path, "perturb"));
  mv.merge(cmd, cfg);
  cfg.set_if(cmd->get_option("--eps"), "eps", eps);
  cfg.set_if(cmd->get_option("--dbar"), "dbar", dbar);
  cfg.set_if(cmd->get_option("--tau"), "tau", tau);
  cfg.set_if(cmd->get_option("--out"), "out", out);

  if (!cfg.has("family") && !cfg.has("design")) cfg.merged()["family"] = "square";
  if (!cfg.has("p0")) cfg.merged()["p0"] = 0.25;
  if (!cfg.has("p1")) cfg.merged()["p1"] = 0.25;
  const auto model = model_from_config(cfg);
  const double eps_eff = cfg.get<double>("eps", 0.1);
  const int dbar_eff = cfg.get<int>("dbar", 0);
  const double tau_eff = cfg.get<double>("tau", 0.5);

  const auto pm = misivqr::construct_perturbation(model, eps_eff, dbar_eff, tau_eff);
  const double sup = misivqr::verify_observational_equivalence(model, pm);

  json result;
  result["model"] = model;
  result["epsilon"] = eps_eff;
  result["d_bar"] = dbar_eff;
  result["tau"] = tau_eff;
  result["p_tilde"] = {pm.p0_tilde(), pm.p1_tilde()};
  result["q_at_tau"] = model.q.value(dbar_eff, tau_eff);
  result["q_tilde_at_tau"] = pm.q_tilde(dbar_eff, tau_eff);
  result["q_shift"] = pm.q_tilde(dbar_eff, tau_eff) - model.q.value(dbar_eff, tau_eff);
  result["sup_distance"] = sup;

  const std::string out_path = cfg.get<std::string>("out", "-");
  CommandIo io{"perturb", cfg.merged(),
               manifest.empty() ? (out_path == "-" || out_path.empty() ? "" : out_path + ".manifest.json")
                                : manifest,
               {}};
  emit(result, out_path, io);
  io.write_manifest();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instrumental-variable quantile regression with a misclassified treatment"};
  app.require_subcommand(1);


  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a dataset and write it as CSV");
  ModelFlagVars sim_mv;
  std::string sim_config, sim_out, sim_manifest;
  long long sim_n = 1000, sim_seed = -1;
  add_model_flags(sim, sim_mv.design, sim_mv.family, sim_mv.a, sim_mv.b, sim_mv.rho, sim_mv.gamma,
                  sim_mv.p0, sim_mv.p1, sim_mv.z_prob1);
  sim->add_option("--n", sim_n, "sample size");
  sim->add_option("--seed", sim_seed, "RNG seed (required)");
  sim->add_option("--out", sim_out, "output CSV path");
  sim->add_option("--manifest", sim_manifest, "manifest path (default <out>.manifest.json)");
  sim->add_option("--config", sim_config, "JSON config or manifest to replay");

  // population
  auto* pop = app.add_subcommand("population", "population summary: QTEs and identified set");
  ModelFlagVars pop_mv;
  std::string pop_config, pop_out = "-", pop_manifest, pop_rule = "instrument";
  double pop_tau = 0.5, pop_step = 0.005, pop_wlo = 0.0, pop_whi = 1.0;
  add_model_flags(pop, pop_mv.design, pop_mv.family, pop_mv.a, pop_mv.b, pop_mv.rho, pop_mv.gamma,
                  pop_mv.p0, pop_mv.p1, pop_mv.z_prob1);
  pop->add_option("--tau", pop_tau, "quantile index");
  pop->add_option("--step", pop_step, "identified-set grid step");
  pop->add_option("--window-lo", pop_wlo, "candidate window lower edge");
  pop->add_option("--window-hi", pop_whi, "candidate window upper edge");
  pop->add_option("--bound-rule", pop_rule, "misclassification bounds: instrument | pointwise");
  pop->add_option("--out", pop_out, "output JSON path ('-' for stdout)");
  pop->add_option("--manifest", pop_manifest, "manifest path");
  pop->add_option("--config", pop_config, "JSON config or manifest to replay");

  // identify
  auto* ide = app.add_subcommand("identify", "identified set only, with optional CSV dump");
  ModelFlagVars ide_mv;
  std::string ide_config, ide_out = "-", ide_manifest, ide_rule = "instrument", ide_csv;
  double ide_tau = 0.5, ide_step = 0.005, ide_wlo = 0.0, ide_whi = 1.0;
  add_model_flags(ide, ide_mv.design, ide_mv.family, ide_mv.a, ide_mv.b, ide_mv.rho, ide_mv.gamma,
                  ide_mv.p0, ide_mv.p1, ide_mv.z_prob1);
  ide->add_option("--tau", ide_tau, "quantile index");
  ide->add_option("--step", ide_step, "grid step");
  ide->add_option("--window-lo", ide_wlo, "candidate window lower edge");
  ide->add_option("--window-hi", ide_whi, "candidate window upper edge");
  ide->add_option("--bound-rule", ide_rule, "misclassification bounds: instrument | pointwise");
  ide->add_option("--csv", ide_csv, "write feasible (y0,y1,p0,p1,theta) rows to CSV");
  ide->add_option("--out", ide_out, "output JSON path ('-' for stdout)");
  ide->add_option("--manifest", ide_manifest, "manifest path");
  ide->add_option("--config", ide_config, "JSON config or manifest to replay");

  // infer
  auto* inf = app.add_subcommand("infer", "confidence set for theta from a dataset CSV");
  std::string inf_config, inf_data, inf_out = "-", inf_csv, inf_manifest;
  double inf_tau = 0.5;
  int inf_bins = 4;
  long long inf_seed = -1;
  misivqr::InferenceConfig inf_ic;
  inf->add_option("--data", inf_data, "dataset CSV (header y,d,z)");
  inf->add_option("--tau", inf_tau, "quantile index");
  inf->add_option("--n-bins", inf_bins, "outcome bins for the inequality instruments");
  inf->add_option("--alpha", inf_ic.alpha, "test size");
  inf->add_option("--b-reps", inf_ic.b_reps, "bootstrap replications");
  inf->add_option("--kappa-scale", inf_ic.kappa_scale, "moment-selection scale");
  inf->add_option("--theta-lo", inf_ic.theta_lo, "theta grid lower edge");
  inf->add_option("--theta-hi", inf_ic.theta_hi, "theta grid upper edge");
  inf->add_option("--theta-step", inf_ic.theta_step, "theta grid step");
  inf->add_option("--y-grid", inf_ic.y_grid, "coarse y0 grid points");
  inf->add_option("--p-grid", inf_ic.p_grid, "coarse misclassification grid points");
  inf->add_option("--refine-rounds", inf_ic.refine_rounds, "local refinement rounds");
  inf->add_option("--seed", inf_seed, "bootstrap seed (required)");
  int inf_threads = 0;
  inf->add_option("--threads", inf_threads, "worker threads (default: MISIVQR_THREADS or cores)");
  inf->add_option("--csv", inf_csv, "per-theta results CSV");
  inf->add_option("--out", inf_out, "output JSON path ('-' for stdout)");
  inf->add_option("--manifest", inf_manifest, "manifest path");
  inf->add_option("--config", inf_config, "JSON config or manifest to replay");

  // coverage
  auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage curve for a design");
  std::string cov_config, cov_out, cov_summary, cov_manifest;
  int cov_design = 1, cov_reps = 200, cov_bins = 4;
  long long cov_n = 1000, cov_seed = -1;
  double cov_tau = 0.5;
  misivqr::InferenceConfig cov_ic;
  cov->add_option("--design", cov_design, "design id (1, 2 or 3)");
  cov->add_option("--n", cov_n, "sample size per replication");
  cov->add_option("--reps", cov_reps, "Monte Carlo replications");
  cov->add_option("--tau", cov_tau, "quantile index");
  cov->add_option("--n-bins", cov_bins, "outcome bins for the inequality instruments");
  cov->add_option("--alpha", cov_ic.alpha, "test size");
  cov->add_option("--b-reps", cov_ic.b_reps, "bootstrap replications");
  cov->add_option("--theta-lo", cov_ic.theta_lo, "theta grid lower edge");
  cov->add_option("--theta-hi", cov_ic.theta_hi, "theta grid upper edge");
  cov->add_option("--theta-step", cov_ic.theta_step, "theta grid step");
  cov->add_option("--y-grid", cov_ic.y_grid, "coarse y0 grid points");
  cov->add_option("--p-grid", cov_ic.p_grid, "coarse misclassification grid points");
  cov->add_option("--refine-rounds", cov_ic.refine_rounds, "local refinement rounds");
  cov->add_option("--seed", cov_seed, "master seed (required)");
  int cov_threads = 0;
  cov->add_option("--threads", cov_threads, "worker threads (default: MISIVQR_THREADS or cores)");
  cov->add_option("--out", cov_out, "coverage CSV path");
  cov->add_option("--summary", cov_summary, "summary JSON path");
  cov->add_option("--manifest", cov_manifest, "manifest path");
  cov->add_option("--config", cov_config, "JSON config or manifest to replay");

  // perturb
  auto* per = app.add_subcommand("perturb", "observational-equivalence witness");
  ModelFlagVars per_mv;
  std::string per_config, per_out = "-", per_manifest;
  double per_eps = 0.1, per_tau = 0.5;
  int per_dbar = 0;
  add_model_flags(per, per_mv.design, per_mv.family, per_mv.a, per_mv.b, per_mv.rho, per_mv.gamma,
                  per_mv.p0, per_mv.p1, per_mv.z_prob1);
  per->add_option("--eps", per_eps, "perturbation size");
  per->add_option("--dbar", per_dbar, "arm to perturb (0 or 1)");
  per->add_option("--tau", per_tau, "quantile index");
  per->add_option("--out", per_out, "output JSON path ('-' for stdout)");
  per->add_option("--manifest", per_manifest, "manifest path");
  per->add_option("--config", per_config, "JSON config or manifest to replay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim)
      return cmd_simulate(sim, sim_config, sim_mv, sim_n, sim_seed, sim_out, sim_manifest);
    if (*pop)
      return cmd_population(pop, pop_config, pop_mv, pop_tau, pop_step, pop_wlo, pop_whi, pop_rule,
                            pop_out, pop_manifest, false, "");
    if (*ide)
      return cmd_population(ide, ide_config, ide_mv, ide_tau, ide_step, ide_wlo, ide_whi, ide_rule,
                            ide_out, ide_manifest, true, ide_csv);
    if (*inf)
      return cmd_infer(inf, inf_config, inf_data, inf_tau, inf_bins, inf_seed, inf_threads,
                       inf_out, inf_csv, inf_manifest, inf_ic);
    if (*cov)
      return cmd_coverage(cov, cov_config, cov_design, cov_n, cov_reps, cov_tau, cov_bins,
                          cov_seed, cov_threads, cov_out, cov_summary, cov_manifest, cov_ic);
    if (*per)
      return cmd_perturb(per, per_config, per_mv, per_eps, per_dbar, per_tau, per_out,
                         per_manifest);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}
