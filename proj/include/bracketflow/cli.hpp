#pragma once

// Command-line front end. Resolves inputs (catalog names or bracket JSON
// files), runs the requested computation and writes artifacts:
//   trajectory.csv   sampled diagnostics (flow-like commands)
//   summary.json     configuration, label, classification, verdicts
// Output is byte-deterministic for a fixed config + seed. Exit codes:
//   0 success, 2 flow ended in a finite-time blow-up, 1 any error.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "bracketflow/bracket.hpp"
#include "bracketflow/catalog.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/errors.hpp"
#include "bracketflow/flows.hpp"
#include "bracketflow/serialization.hpp"
#include "bracketflow/stratification.hpp"
#include "bracketflow/stratum_label.hpp"

namespace bracketflow {

struct RunConfig {
  std::string command;
  std::string input;
  std::string variant = "unimodular";
  double t_end = 10.0;
  int sample_count = 200;
  double tol_grad = 1e-10;
  double rtol = 1e-9;
  double atol = 1e-12;
  double scale = 0.0;  // blowdown rescale; 0 means use t_end
  std::string output_dir = ".";
  long long seed = 12345;
  std::string filter;  // comma-separated catalog tags
  int jobs = 1;
};

namespace cli_detail {

inline bool log_enabled() {
  const char* v = std::getenv("BRACKETFLOW_LOG");
  if (v == nullptr || *v == '\0') return false;
  const std::string s(v);
  return s != "0" && s != "off" && s != "none";
}

inline void log(const std::string& msg) {
  if (log_enabled()) std::cerr << "[bracketflow] " << msg << std::endl;
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline FlowVariant parse_variant(const std::string& v) {
  if (v == "plain") return FlowVariant::Plain;
  if (v == "unimodular") return FlowVariant::Unimodular;
  if (v == "gauged") return FlowVariant::Gauged;
  throw BadConfig("unknown variant '" + v + "' (plain|unimodular|gauged)");
}

inline void validate(const RunConfig& c) {
  if (!(c.t_end > 0.0)) throw BadConfig("t_end must be positive");
  if (c.sample_count < 2) throw BadConfig("sample_count must be at least 2");
  if (!(c.tol_grad > 0.0) || !(c.rtol > 0.0) || !(c.atol > 0.0))
    throw BadConfig("tolerances must be positive");
  if (c.scale < 0.0) throw BadConfig("scale must be nonnegative");
  if (c.jobs < 1) throw BadConfig("jobs must be at least 1");
}

// Sample times: t = 0, then sample_count-1 log-spaced points from
// t_end/1000 up to and including t_end.
inline std::vector<double> sample_schedule(double t_end, int count) {
  std::vector<double> ts{0.0};
  const int k = count - 1;
  if (k == 1) {
    ts.push_back(t_end);
    return ts;
  }
  const double t0 = t_end * 1e-3;
  const double r = std::pow(t_end / t0, 1.0 / (k - 1));
  double v = t0;
  for (int i = 0; i < k - 1; ++i) {
    ts.push_back(v);
    v *= r;
  }
  ts.push_back(t_end);
  return ts;
}

}  // namespace cli_detail

// A catalog name or a path to a bracket JSON file.
inline std::pair<Bracket, std::string> resolve_input(const std::string& input) {
  if (input.empty()) throw BadConfig("no input given (--input)");
  namespace fs = std::filesystem;
  if (fs::exists(input) && fs::is_regular_file(input)) {
    const Json j = Json::parse(read_text_file(input));
    std::string name = j.contains("name") ? j.at("name").get<std::string>()
                                          : fs::path(input).stem().string();
    return {bracket_from_json(j), name};
  }
  return {catalog_get(input).bracket(), input};
}

namespace cli_detail {

inline Json config_json(const RunConfig& c) {
  Json j;
  j["variant"] = c.variant;
  j["t_end"] = c.t_end;
  j["sample_count"] = c.sample_count;
  j["seed"] = c.seed;
  Json tol;
  tol["tol_grad"] = c.tol_grad;
  tol["rtol"] = c.rtol;
  tol["atol"] = c.atol;
  j["tolerances"] = std::move(tol);
  j["output_dir"] = c.output_dir;
  return j;
}

inline Json base_summary(const RunConfig& c, const std::string& input_name) {
  Json j;
  j["schema"] = "bracketflow/1";
  j["command"] = c.command;
  j["input"] = input_name;
  j["config"] = config_json(c);
  return j;
}

inline Json termination_json(const FlowTrajectory* traj) {
  Json t;
  if (traj == nullptr) {
    t["status"] = "Completed";
    t["t_final"] = 0.0;
    t["message"] = "";
  } else {
    t["status"] = traj->termination == TerminationStatus::BlowUp ? "BlowUp" : "Completed";
    t["t_final"] = traj->times.empty() ? 0.0 : traj->times.back();
    t["message"] = traj->message;
  }
  return t;
}

inline Json rng_json(const RunConfig& c, bool gauge_used) {
  Json j;
  j["seed"] = c.seed;
  Json consumers = Json::array();
  if (gauge_used) consumers.push_back("gauge_to_Vnn");
  j["consumers"] = std::move(consumers);
  return j;
}

inline void write_summary(const RunConfig& c, const Json& summary) {
  namespace fs = std::filesystem;
  fs::create_directories(c.output_dir);
  write_text_file((fs::path(c.output_dir) / "summary.json").string(),
                  summary.dump(2) + "\n");
}

inline void write_csv(const RunConfig& c, const FlowTrajectory& traj) {
  namespace fs = std::filesystem;
  fs::create_directories(c.output_dir);
  write_text_file((fs::path(c.output_dir) / "trajectory.csv").string(),
                  trajectory_csv_string(traj));
}

struct FlowRun {
  Bracket start;
  std::optional<StratumLabel> label;
  std::optional<GaugeResult> gauge;
  FlowTrajectory traj;
};

// Shared flow driver: label (if obtainable), gauging for the gauged variant,
// then integration over the sample schedule.
inline FlowRun drive_flow(const Bracket& b0, FlowVariant variant, const RunConfig& cfg) {
  FlowRun run{b0, {}, {}, {}};
  StratumOptions sopts;
  sopts.grad_tol = cfg.tol_grad;
  if (variant == FlowVariant::Gauged) {
    run.label = stratum_label(b0, sopts);
  } else {
    try {
      run.label = stratum_label(b0, sopts);
    } catch (const Error& e) {
      log(std::string("no stratum label: ") + e.what());
    }
  }
  if (run.label) log("stratum label computed");

  if (variant == FlowVariant::Gauged) {
    const double mass = negative_component_mass(b0, *run.label);
    if (mass > 1e-10) {
      GaugeOptions gopts;
      gopts.seed = static_cast<std::uint64_t>(cfg.seed);
      run.gauge = gauge_to_Vnn(b0, *run.label, gopts);
      run.start = run.gauge->gauged;
      log("gauged into the nonnegative cone, residual mass " +
          std::to_string(run.gauge->negative_mass));
    }
  }

  FlowOptions fopts;
  fopts.rtol = cfg.rtol;
  fopts.atol = cfg.atol;
  fopts.sample_times = sample_schedule(cfg.t_end, cfg.sample_count);
  run.traj = bracket_flow(run.start, cfg.t_end, variant,
                          run.label ? &*run.label : nullptr, fopts);
  log("flow finished: " + run.traj.message + ", " + std::to_string(run.traj.size()) +
      " samples");
  return run;
}

inline Json gauge_json(const FlowRun& run) {
  Json g;
  g["applied"] = static_cast<bool>(run.gauge);
  if (run.gauge) g["negative_mass_after"] = run.gauge->negative_mass;
  return g;
}

// Monotonicity verdicts along a gauged trajectory: the Lyapunov quantity
// F = v^2 scal~ and the lower bound v (||mu_m|| + ||mu_h||^{1/2}).
inline Json monotonicity_json(const FlowTrajectory& traj) {
  Json j;
  double min_delta = 0.0;
  double max_drift = 0.0;
  for (size_t i = 0; i + 1 < traj.f_beta.size(); ++i)
    min_delta = std::min(min_delta, traj.f_beta[i + 1] - traj.f_beta[i]);
  for (size_t i = 0; i < traj.f_beta.size(); ++i)
    max_drift = std::max(max_drift, std::abs(traj.f_beta[i] - traj.f_beta.front()));
  j["F_beta_nondecreasing"] = min_delta >= -1e-10;
  j["min_delta"] = min_delta;
  j["F_initial"] = traj.f_beta.empty() ? 0.0 : traj.f_beta.front();
  j["F_final"] = traj.f_beta.empty() ? 0.0 : traj.f_beta.back();
  j["F_drift_from_initial"] = max_drift;

  double lb0 = 0.0, lb_min_ratio = 1.0;
  for (size_t i = 0; i < traj.size(); ++i) {
    const double lb = traj.v_beta[i] * type_iii_quantity(traj.states[i]);
    if (i == 0)
      lb0 = lb;
    else if (lb0 > 0.0)
      lb_min_ratio = std::min(lb_min_ratio, lb / lb0);
  }
  j["lower_bound_min_ratio"] = lb_min_ratio;
  return j;
}

// Min/max of the curvature estimates over the sampled states. Available only
// while scal~ < 0 (the estimates' hypothesis).
inline Json estimates_json(const FlowTrajectory& traj, const StratumLabel& label) {
  Json j;
  bool available = !traj.states.empty();
  double min_pairing = std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  double min_eq = std::numeric_limits<double>::infinity();
  double max_eq = 0.0;
  for (const Bracket& b : traj.states) {
    CurvatureOptions copts;
    copts.check_jacobi = false;
    copts.check_splitting = false;
    try {
      const EstimateReport e = estimates(b, label, copts);
      min_pairing = std::min(min_pairing, e.pairing_beta_plus);
      min_gap = std::min(min_gap, e.gap);
      min_eq = std::min(min_eq, e.equality_residual);
      max_eq = std::max(max_eq, e.equality_residual);
    } catch (const ScalModNonnegative&) {
      available = false;
      break;
    }
  }
  j["available"] = available;
  if (available) {
    j["pairing_beta_plus_min"] = min_pairing;
    j["gap_min"] = min_gap;
    j["equality_residual_min"] = min_eq;
    j["equality_residual_max"] = max_eq;
  } else {
    j["reason"] = "scal~ >= 0 at some sample";
  }
  return j;
}

inline Json classification_json_of(const Bracket& b, const std::optional<StratumLabel>& label,
                                   double tol) {
  if (!label) {
    CurvatureOptions copts;
    copts.check_jacobi = false;
    copts.check_splitting = false;
    const CurvatureReport r = curvature_report(b, copts);
    Json j;
    if (r.ric_mod.norm() < 1e-8 * (1.0 + bracket_norm(b) * bracket_norm(b))) {
      j["kind"] = "Flat";
      j["c"] = 0.0;
      j["D"] = matrix_to_json(Matrix::Zero(b.n(), b.n()));
      j["soliton_residual"] = 0.0;
      j["derivation_residual"] = 0.0;
      return j;
    }
    j["kind"] = "Generic";
    j["note"] = "no stratum label available";
    return j;
  }
  CurvatureOptions copts;
  copts.check_jacobi = false;
  copts.check_splitting = false;
  return classification_to_json(classify(b, *label, tol, copts));
}

// --- commands ---------------------------------------------------------------

inline int cmd_flow(RunConfig cfg) {
  const auto [b0, name] = resolve_input(cfg.input);
  log("flow " + name + " variant=" + cfg.variant);
  const FlowVariant variant = parse_variant(cfg.variant);
  FlowRun run = drive_flow(b0, variant, cfg);

  Json summary = base_summary(cfg, name);
  summary["gauge"] = gauge_json(run);
  if (run.label) summary["beta"] = stratum_label_to_json(*run.label);
  if (!run.traj.states.empty())
    summary["classification"] =
        classification_json_of(run.traj.states.back(), run.label, 1e-6);
  if (variant == FlowVariant::Gauged) {
    summary["monotonicity"] = monotonicity_json(run.traj);
    summary["estimates"] = estimates_json(run.traj, *run.label);
  }
  summary["termination"] = termination_json(&run.traj);
  Json outputs;
  outputs["trajectory_csv"] = "trajectory.csv";
  outputs["summary_json"] = "summary.json";
  summary["outputs"] = std::move(outputs);
  summary["rng"] = rng_json(cfg, static_cast<bool>(run.gauge));

  write_csv(cfg, run.traj);
  write_summary(cfg, summary);
  const bool blowup = run.traj.termination == TerminationStatus::BlowUp;
  std::cout << "flow " << name << " variant=" << cfg.variant
            << " status=" << (blowup ? "BlowUp" : "Completed")
            << " t_final=" << (run.traj.times.empty() ? 0.0 : run.traj.times.back())
            << " samples=" << run.traj.size() << "\n";
  return blowup ? 2 : 0;
}

inline int cmd_stratum(RunConfig cfg) {
  const auto [b0, name] = resolve_input(cfg.input);
  log("stratum " + name);
  StratumOptions sopts;
  sopts.grad_tol = cfg.tol_grad;
  const StratumLabel label = stratum_label(b0, sopts);

  Json summary = base_summary(cfg, name);
  summary["beta"] = stratum_label_to_json(label);

  Json cross;
  try {
    const StratumLabel alg = beta_from_nilradical(b0, sopts);
    double gap = 0.0;
    if (alg.eigenvalues.size() == label.eigenvalues.size())
      gap = (alg.eigenvalues - label.eigenvalues).cwiseAbs().maxCoeff();
    else
      gap = std::numeric_limits<double>::infinity();
    cross["available"] = true;
    cross["max_eigenvalue_gap"] = gap;
  } catch (const Error& e) {
    cross["available"] = false;
    cross["reason"] = e.what();
  }
  summary["cross_check"] = std::move(cross);

  summary["termination"] = termination_json(nullptr);
  Json outputs;
  outputs["summary_json"] = "summary.json";
  summary["outputs"] = std::move(outputs);
  summary["rng"] = rng_json(cfg, false);
  write_summary(cfg, summary);

  std::ostringstream eig;
  for (int i = 0; i < label.eigenvalues.size(); ++i)
    eig << (i ? ", " : "") << label.eigenvalues(i);
  std::cout << "stratum " << name << " eigenvalues=[" << eig.str() << "]\n";
  return 0;
}

inline int cmd_soliton_check(RunConfig cfg) {
  const auto [b0, name] = resolve_input(cfg.input);
  log("soliton-check " + name);
  CurvatureOptions copts;
  const CurvatureReport rep = curvature_report(b0, copts);

  Json summary = base_summary(cfg, name);
  summary["curvature"] = curvature_report_to_json(rep);

  std::optional<StratumLabel> label;
  StratumOptions sopts;
  sopts.grad_tol = cfg.tol_grad;
  try {
    label = stratum_label(b0, sopts);
  } catch (const FlatBracket&) {
    // flat inputs carry no label; classification below reports Flat
  }
  if (label) summary["beta"] = stratum_label_to_json(*label);
  summary["classification"] = classification_json_of(b0, label, 1e-6);

  Json est;
  if (label && rep.scal_mod < 0.0) {
    const EstimateReport e = estimates(b0, *label, copts);
    est["available"] = true;
    est["pairing_beta_plus"] = e.pairing_beta_plus;
    est["gap"] = e.gap;
    est["equality_residual"] = e.equality_residual;
  } else {
    est["available"] = false;
    est["reason"] = label ? "scal~ >= 0" : "no stratum label";
  }
  summary["estimates"] = std::move(est);

  summary["termination"] = termination_json(nullptr);
  Json outputs;
  outputs["summary_json"] = "summary.json";
  summary["outputs"] = std::move(outputs);
  summary["rng"] = rng_json(cfg, false);
  write_summary(cfg, summary);

  std::cout << "soliton-check " << name << " kind="
            << summary["classification"]["kind"].get<std::string>()
            << " scal_mod=" << rep.scal_mod << "\n";
  return 0;
}

inline int cmd_lyapunov(RunConfig cfg) {
  cfg.variant = "gauged";
  const auto [b0, name] = resolve_input(cfg.input);
  log("lyapunov " + name);
  FlowRun run = drive_flow(b0, FlowVariant::Gauged, cfg);

  Json summary = base_summary(cfg, name);
  summary["gauge"] = gauge_json(run);
  summary["beta"] = stratum_label_to_json(*run.label);
  summary["monotonicity"] = monotonicity_json(run.traj);
  summary["estimates"] = estimates_json(run.traj, *run.label);
  if (!run.traj.states.empty())
    summary["classification"] =
        classification_json_of(run.traj.states.back(), run.label, 1e-6);
  summary["termination"] = termination_json(&run.traj);
  Json outputs;
  outputs["trajectory_csv"] = "trajectory.csv";
  outputs["summary_json"] = "summary.json";
  summary["outputs"] = std::move(outputs);
  summary["rng"] = rng_json(cfg, static_cast<bool>(run.gauge));

  write_csv(cfg, run.traj);
  write_summary(cfg, summary);
  const bool blowup = run.traj.termination == TerminationStatus::BlowUp;
  std::cout << "lyapunov " << name << " nondecreasing="
            << (summary["monotonicity"]["F_beta_nondecreasing"].get<bool>() ? "yes" : "no")
            << " min_delta=" << summary["monotonicity"]["min_delta"].get<double>() << "\n";
  return blowup ? 2 : 0;
}

inline int cmd_blowdown(RunConfig cfg) {
  cfg.variant = "gauged";
  const auto [b0, name] = resolve_input(cfg.input);
  log("blowdown " + name);
  FlowRun run = drive_flow(b0, FlowVariant::Gauged, cfg);
  const double s = cfg.scale > 0.0 ? cfg.scale : cfg.t_end;
  const FlowTrajectory blown = blow_down(run.traj, s);

  Json summary = base_summary(cfg, name);
  summary["gauge"] = gauge_json(run);
  summary["beta"] = stratum_label_to_json(*run.label);

  Json bd;
  bd["scale"] = s;
  if (!blown.states.empty()) {
    // Soliton detection at the blown-down scale is meaningful to ~1e-4.
    summary["classification"] =
        classification_json_of(blown.states.back(), run.label, 1e-4);
    CurvatureOptions copts;
    copts.check_jacobi = false;
    copts.check_splitting = false;
    try {
      const EstimateReport e = estimates(blown.states.back(), *run.label, copts);
      bd["soliton_residual"] = e.equality_residual;
    } catch (const ScalModNonnegative&) {
      bd["soliton_residual"] = nullptr;
    }
  }
  summary["blowdown"] = std::move(bd);
  summary["termination"] = termination_json(&run.traj);
  Json outputs;
  outputs["trajectory_csv"] = "trajectory.csv";
  outputs["summary_json"] = "summary.json";
  summary["outputs"] = std::move(outputs);
  summary["rng"] = rng_json(cfg, static_cast<bool>(run.gauge));

  write_csv(cfg, blown);
  write_summary(cfg, summary);
  const bool blowup = run.traj.termination == TerminationStatus::BlowUp;
  std::cout << "blowdown " << name << " scale=" << s << " kind="
            << summary["classification"]["kind"].get<std::string>() << "\n";
  return blowup ? 2 : 0;
}

inline int cmd_catalog(RunConfig cfg) {
  const std::vector<std::string> names = catalog_list(split_csv(cfg.filter));
  log("catalog sweep over " + std::to_string(names.size()) + " entries, jobs=" +
      std::to_string(cfg.jobs));

  std::vector<Json> rows(names.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= names.size()) return;
      const CatalogEntry& e = catalog_get(names[i]);
      const Bracket b = e.bracket();
      CurvatureOptions copts;
      copts.check_jacobi = false;
      copts.check_splitting = false;
      const CurvatureReport rep = curvature_report(b, copts);
      Json row;
      row["name"] = e.name;
      row["dim_h"] = e.dim_h;
      row["dim_m"] = e.dim_m;
      Json tags = Json::array();
      for (const auto& t : e.tags) tags.push_back(t);
      row["tags"] = std::move(tags);
      row["scal_mod"] = rep.scal_mod;
      std::optional<StratumLabel> label;
      try {
        StratumOptions sopts;
        sopts.grad_tol = cfg.tol_grad;
        label = beta_from_nilradical(b, sopts);
      } catch (const Error&) {
        // flat or outside the algebraic cases: classified without a label
      }
      if (label) {
        Json eig = Json::array();
        for (int k = 0; k < label->eigenvalues.size(); ++k)
          eig.push_back(label->eigenvalues(k));
        row["beta_eigenvalues"] = std::move(eig);
      } else {
        row["beta_eigenvalues"] = nullptr;
      }
      row["classification"] = classification_json_of(b, label, 1e-6)["kind"];
      rows[i] = std::move(row);
    }
  };
  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(names.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  Json summary = base_summary(cfg, cfg.filter.empty() ? "all" : cfg.filter);
  Json entries = Json::array();
  for (auto& r : rows) entries.push_back(std::move(r));
  summary["entries"] = std::move(entries);
  summary["termination"] = termination_json(nullptr);
  Json outputs;
  outputs["summary_json"] = "summary.json";
  summary["outputs"] = std::move(outputs);
  summary["rng"] = rng_json(cfg, false);
  write_summary(cfg, summary);

  for (const Json& r : summary["entries"]) {
    std::ostringstream line;
    line << r["name"].get<std::string>() << " (" << r["dim_h"].get<int>() << "+"
         << r["dim_m"].get<int>() << ") " << r["classification"].get<std::string>()
         << " scal_mod=" << r["scal_mod"].get<double>();
    std::cout << line.str() << "\n";
  }
  return 0;
}

}  // namespace cli_detail

// Entry point shared by the binary and the tests. `args` excludes the program
// name and is in natural order.
inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"bracket flows, strata and soliton analysis"};
  app.set_help_flag("--help", "print usage");
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  // Per-subcommand map from config-file key to option, for the merge below.
  std::map<CLI::App*, std::map<std::string, CLI::Option*>> binds;

  auto add_common = [&](CLI::App* sub, bool with_input) {
    sub->set_help_flag("--help", "print usage");
    auto& m = binds[sub];
    if (with_input)
      m["input"] = sub->add_option("--input", cfg.input, "catalog name or bracket JSON path");
    m["output_dir"] = sub->add_option("--output-dir", cfg.output_dir, "artifact directory");
    m["seed"] = sub->add_option("--seed", cfg.seed, "seed for randomized gauging restarts");
    sub->add_option("--config", config_path, "JSON config file (flags take precedence)");
  };
  auto add_flow_opts = [&](CLI::App* sub) {
    auto& m = binds[sub];
    m["t_end"] = sub->add_option("--t-end", cfg.t_end, "integration end time");
    m["sample_count"] = sub->add_option("--sample-count", cfg.sample_count, "number of samples");
    m["rtol"] = sub->add_option("--rtol", cfg.rtol, "relative integration tolerance");
    m["atol"] = sub->add_option("--atol", cfg.atol, "absolute integration tolerance");
    m["tol_grad"] = sub->add_option("--tol-grad", cfg.tol_grad, "gradient-descent tolerance");
  };

  CLI::App* flow = app.add_subcommand("flow", "integrate a bracket flow");
  add_common(flow, true);
  add_flow_opts(flow);
  binds[flow]["variant"] =
      flow->add_option("--variant", cfg.variant, "plain | unimodular | gauged");

  CLI::App* stratum = app.add_subcommand("stratum", "stratum label via the gradient flow");
  add_common(stratum, true);
  binds[stratum]["tol_grad"] =
      stratum->add_option("--tol-grad", cfg.tol_grad, "gradient-descent tolerance");

  CLI::App* soliton = app.add_subcommand("soliton-check", "curvature and classification");
  add_common(soliton, true);
  binds[soliton]["tol_grad"] =
      soliton->add_option("--tol-grad", cfg.tol_grad, "gradient-descent tolerance");

  CLI::App* lyap = app.add_subcommand("lyapunov", "Lyapunov monotonicity along the gauged flow");
  add_common(lyap, true);
  add_flow_opts(lyap);

  CLI::App* blowdown = app.add_subcommand("blowdown", "rescaled long-time analysis");
  add_common(blowdown, true);
  add_flow_opts(blowdown);
  binds[blowdown]["scale"] =
      blowdown->add_option("--scale", cfg.scale, "blow-down scale (default: t_end)");

  CLI::App* cat = app.add_subcommand("catalog", "list and sweep the built-in catalog");
  add_common(cat, false);
  binds[cat]["filter"] = cat->add_option("--filter", cfg.filter, "comma-separated tags");
  binds[cat]["jobs"] = cat->add_option("--jobs", cfg.jobs, "parallel sweep workers");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    cfg.command = active->get_name();

    // Config file: fills only options not set on the command line.
    if (!config_path.empty()) {
      const Json conf = Json::parse(read_text_file(config_path));
      if (!conf.is_object()) throw BadConfig("config file must hold a JSON object");
      const auto& m = binds[active];
      for (const auto& [key, value] : conf.items()) {
        const auto it = m.find(key);
        if (it == m.end())
          throw BadConfig("config key '" + key + "' unknown for command " + cfg.command);
        if (it->second->count() == 0) {
          // route through the option parser so types are checked uniformly
          const std::string text =
              value.is_string() ? value.get<std::string>() : value.dump();
          it->second->add_result(text);
          it->second->run_callback();
        }
      }
    }

    cli_detail::validate(cfg);

    if (cfg.command == "flow") return cli_detail::cmd_flow(cfg);
    if (cfg.command == "stratum") return cli_detail::cmd_stratum(cfg);
    if (cfg.command == "soliton-check") return cli_detail::cmd_soliton_check(cfg);
    if (cfg.command == "lyapunov") return cli_detail::cmd_lyapunov(cfg);
    if (cfg.command == "blowdown") return cli_detail::cmd_blowdown(cfg);
    if (cfg.command == "catalog") return cli_detail::cmd_catalog(cfg);
    throw BadConfig("unknown command " + cfg.command);
  } catch (const Error& e) {
    Json err;
    err["error"]["kind"] = e.kind();
    err["error"]["message"] = e.what();
    std::cerr << err.dump(2) << std::endl;
    return 1;
  } catch (const std::exception& e) {
    Json err;
    err["error"]["kind"] = "Internal";
    err["error"]["message"] = e.what();
    std::cerr << err.dump(2) << std::endl;
    return 1;
  }
}

inline int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args));
}

}  // namespace bracketflow
