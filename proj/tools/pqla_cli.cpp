// Command-line front end: simulate, estimate, mc, check, report.
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 simulation error,
// 4 estimation error, 1 anything else.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pqla/config.hpp"
#include "pqla/error.hpp"
#include "pqla/estimators.hpp"
#include "pqla/experiments.hpp"
#include "pqla/memory.hpp"
#include "pqla/path_io.hpp"
#include "pqla/process_sim.hpp"
#include "pqla/svg.hpp"
#include "pqla/theory_checks.hpp"

namespace fs = std::filesystem;
using namespace pqla;

namespace {

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw ConfigError(origin + ": invalid seed '" + text + "'");
  return v;
}

// --seed beats PQLA_SEED beats the config file.
void apply_seed(ExperimentConfig& cfg, const std::string& flag) {
  if (!flag.empty()) {
    cfg.seed = parse_seed(flag, "--seed");
  } else if (const char* env = std::getenv("PQLA_SEED"); env && *env) {
    cfg.seed = parse_seed(env, "PQLA_SEED");
  }
}

fs::path output_dir(const std::string& flag, const CliConfig& cfg) { return flag.empty() ? fs::path(cfg.output.dir) : fs::path(flag); }

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_seed(item, "list"));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const std::invalid_argument&) {
      throw ConfigError("invalid number '" + item + "' in list");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

void print_summary(const MCSummary& s) {
  std::cout << "replications " << s.reps << ", failed " << s.failures << " (rate " << fmt(s.failure_rate) << ")\n";
  for (const auto& e : s.estimators) {
    std::cout << "estimator " << to_string(e.kind) << ": ok " << e.n_ok << ", boundary rate " << fmt(e.boundary_rate)
              << ", psi pass rate " << fmt(e.psi_pass_rate) << "\n";
    for (std::size_t k = 0; k < e.ks.size(); ++k) {
      const auto idx = static_cast<Eigen::Index>(k);
      std::cout << "  coord " << k + 1 << ": mean u " << fmt(e.mean_u[idx]) << ", var u " << fmt(e.cov_u(idx, idx))
                << ", KS D " << fmt(e.ks[k].statistic) << ", p " << fmt(e.ks[k].p_value) << " -> "
                << (e.ks[k].pass ? "PASS" : "FAIL") << "\n";
    }
    if (!e.inverse_mass_quantiles.empty()) {
      std::cout << "  1/mass quantiles (5/50/95%): " << fmt(e.inverse_mass_quantiles[0]) << " "
                << fmt(e.inverse_mass_quantiles[1]) << " " << fmt(e.inverse_mass_quantiles[2]) << "\n";
    }
  }
}

void render_plots(const MCReport& report, const fs::path& dir) {
  for (const auto& e : report.summary.estimators) {
    const std::size_t dim = e.ks.size();
    for (std::size_t k = 0; k < dim; ++k) {
      std::vector<double> z;
      for (const auto& r : report.rows) {
        if (r.kind == e.kind && !r.failed) z.push_back(r.z[static_cast<Eigen::Index>(k)]);
      }
      if (z.size() < 2) continue;
      const std::string tag = to_string(e.kind) + "_" + std::to_string(k + 1);
      write_text(dir / ("hist_" + tag + ".svg"), svg_histogram(z, 30, "studentized error, estimator " + tag));
      write_text(dir / ("qq_" + tag + ".svg"), svg_qq_plot(z, "normal QQ-plot, estimator " + tag));
      std::vector<double> x, tail;
      for (double t = 0.25; t <= 4.0 + 1e-12; t += 0.25) {
        std::size_t hits = 0;
        for (double v : z) hits += std::abs(v) > t ? 1 : 0;
        x.push_back(t);
        tail.push_back(static_cast<double>(hits) / static_cast<double>(z.size()));
      }
      write_text(dir / ("tail_" + tag + ".svg"), svg_loglog(x, tail, "tail decay, estimator " + tag, "x", "P[|z| > x]"));
    }
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_flag, const std::string& seed_flag) {
  CliConfig cfg = load_config(config_path);
  apply_seed(cfg.experiment, seed_flag);
  const ExperimentConfig& e = cfg.experiment;
  const fs::path dir = output_dir(out_flag, cfg);
  std::ostringstream csv;
  if (e.model.kind == ModelKind::kRegression) {
    const TimeGrid grid(e.horizon, static_cast<std::size_t>(std::llround(e.horizon / e.step)));
    RegressionOptions ro;
    ro.refine = e.refine;
    write_path_csv(csv, to_table(sim_regression(e.model.regression(), grid, e.seed, ro), "regression"));
  } else {
    VolEnvOptions vo;
    vo.refine = e.refine;
    write_path_csv(csv, to_table(sim_vol_env(e.model.volatility(), TimeGrid(e.horizon, e.n_obs), e.seed, vo), "volatility"));
  }
  write_text(dir / "paths.csv", csv.str());
  write_json(dir / "config.json", to_json(cfg));
  std::cout << "wrote " << (dir / "paths.csv").string() << "\n";
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& paths_path, const std::string& out_flag) {
  const CliConfig cfg = load_config(config_path);
  const ExperimentConfig& e = cfg.experiment;
  std::ifstream in(paths_path);
  if (!in) throw ConfigError("cannot open paths file " + paths_path);
  PathTable table;
  try {
    table = read_path_csv(in);
  } catch (const std::runtime_error& err) {
    throw ConfigError(paths_path + ": " + err.what());
  }
  if (table.model != to_string(e.model.kind)) {
    throw ConfigError("paths file holds model '" + table.model + "' but the config selects '" + to_string(e.model.kind) + "'");
  }
  FieldPtr field;
  ThetaBox box;
  Vector theta_star, rate;
  int psi = 1;
  if (e.model.kind == ModelKind::kRegression) {
    const ErgodicModelSpec model = e.model.regression();
    const RegressionPaths paths = regression_from_table(table);
    field = make_regression_field(paths, model, e.linear_fast_path);
    box = model.box;
    theta_star = model.theta_star;
    rate = Vector::Constant(theta_star.size(), 1.0 / std::sqrt(paths.grid().horizon()));
    if (e.compute_psi) {
      PsiOptions po = e.psi;
      if (e.psi_stationary_level) po.level = stationary_envelope_moment(model, po.r_star);
      psi = psi_truncation(paths.L.values, paths.grid().step(), model, paths.grid().horizon(), po,
                           derive_seed(table.seed, Stream::kPsi))
                .psi;
    }
  } else {
    const VolEnvModelSpec model = e.model.volatility();
    const VolEnvPaths paths = volatility_from_table(table);
    field = make_volatility_field(paths, model);
    box = model.box;
    theta_star = model.theta_star;
    rate = Vector::Constant(1, 1.0 / std::sqrt(static_cast<double>(paths.grid().n_steps())));
  }
  const FieldEval eval(field, box, theta_star, rate, 0);
  nlohmann::json out = nlohmann::json::array();
  for (EstimatorKind kind : e.estimators) {
    EstimateRecord rec = kind == EstimatorKind::kQmle ? qmle(eval.field(), box, e.qmle) : qbe(eval.field(), Prior::uniform(), box, e.qbe);
    localize(rec, eval);
    rec.psi = psi;
    out.push_back(to_json(rec));
    std::cout << to_string(kind) << ": theta_hat";
    for (Eigen::Index i = 0; i < rec.theta_hat.size(); ++i) std::cout << ' ' << format_double(rec.theta_hat[i]);
    std::cout << (rec.boundary_flag ? " (boundary)" : "") << "\n";
  }
  const fs::path dir = output_dir(out_flag, cfg);
  write_json(dir / "estimate.json", out);
  return 0;
}

int cmd_mc(const std::string& config_path, const std::string& out_flag, const std::string& seed_flag, unsigned jobs,
           std::size_t reps) {
  CliConfig cfg = load_config(config_path);
  apply_seed(cfg.experiment, seed_flag);
  if (jobs > 0) cfg.experiment.jobs = jobs;
  if (reps > 0) cfg.experiment.reps = reps;
  const fs::path dir = output_dir(out_flag, cfg);
  const MCReport report = mc_estimate(cfg.experiment);
  write_report(report, dir);
  write_json(dir / "config.json", to_json(cfg));
  if (cfg.output.svg) render_plots(report, dir);
  print_summary(report.summary);
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_flag) {
  MCReport report;
  try {
    report = load_report(in_dir);
  } catch (const std::runtime_error& err) {
    throw ConfigError(err.what());
  }
  const fs::path dir = out_flag.empty() ? fs::path(in_dir) : fs::path(out_flag);
  render_plots(report, dir);
  print_summary(report.summary);
  return 0;
}

int cmd_check_b1(double alpha, double rho, const std::string& set, double L, const std::string& out) {
  B1Params params;
  try {
    params = B1Params::from_set(set, alpha, rho);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  const B1Report report = check_b1(params);
  std::ostringstream csv;
  write_b1_csv(csv, report);
  std::cout << csv.str();
  std::cout << "overall " << (report.pass() ? "PASS" : "FAIL") << "\n";
  if (report.pass() && L > 0.0) {
    const MomentOrders m = moment_orders(L, params);
    std::cout << "moment orders L=" << fmt(L) << ": M1=" << fmt(m.m1, 8) << " M2=" << fmt(m.m2, 8) << " M3=" << fmt(m.m3, 8)
              << " M4=" << fmt(m.m4, 8) << "\n";
  }
  if (!out.empty()) write_text(out, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  pqla::use_fixed_mmap_threshold();
  CLI::App app{"pqla: partial quasi-likelihood analysis of stochastic regression models"};
  app.require_subcommand(1);

  std::string config, out, seed, paths, in_dir;
  unsigned jobs = 0;
  std::size_t reps = 0;

  auto* sim = app.add_subcommand("simulate", "Simulate one path set from a config");
  sim->add_option("--config", config, "Configuration file (JSON)")->required();
  sim->add_option("--out", out, "Output directory (default: output.dir)");
  sim->add_option("--seed", seed, "Master seed (falls back to PQLA_SEED, then the config)");

  auto* est = app.add_subcommand("estimate", "Run the estimators on a paths CSV");
  est->add_option("--config", config, "Configuration file (JSON)")->required();
  est->add_option("--paths", paths, "Paths CSV written by simulate")->required();
  est->add_option("--out", out, "Output directory (default: output.dir)");

  auto* mc = app.add_subcommand("mc", "Monte Carlo study of the estimators");
  mc->add_option("--config", config, "Configuration file (JSON)")->required();
  mc->add_option("--out", out, "Output directory (default: output.dir)");
  mc->add_option("--seed", seed, "Master seed (falls back to PQLA_SEED, then the config)");
  mc->add_option("--jobs", jobs, "Worker threads");
  mc->add_option("--reps", reps, "Replications");

  auto* rep = app.add_subcommand("report", "Render SVG plots and a summary for a Monte Carlo run");
  rep->add_option("--in", in_dir, "Directory with rows.csv and summary.json")->required();
  rep->add_option("--out", out, "Directory for the SVG files (default: --in)");

  auto* check = app.add_subcommand("check", "Condition and inequality checkers");
  check->require_subcommand(1);

  double alpha = 0.1, rho = 2.0, L = 0.0;
  std::string set = "i";
  auto* b1 = check->add_subcommand("b1", "Exponent conditions for a parameter family");
  b1->add_option("--alpha", alpha, "alpha in (0, 1)")->required();
  b1->add_option("--rho", rho, "rho > 0")->capture_default_str();
  b1->add_option("--set", set, "Parameter family: i or ii")->capture_default_str();
  b1->add_option("--L", L, "Also print the moment orders for this L");
  b1->add_option("--out", out, "Write the table as CSV");

  RosenthalConfig ros;
  std::string n_list = "64,256,1024,4096";
  auto* rc = check->add_subcommand("rosenthal", "Monte Carlo ratio for the conditional Rosenthal bound");
  rc->add_option("--p", ros.p, "Moment order p")->capture_default_str();
  rc->add_option("--r", ros.r, "Integrability order r > p")->capture_default_str();
  rc->add_option("--n-list", n_list, "Comma-separated block counts")->capture_default_str();
  rc->add_option("--reps", ros.reps, "Replications per n")->capture_default_str();
  rc->add_option("--seed", seed, "Master seed");
  rc->add_option("--jobs", jobs, "Worker threads");
  rc->add_option("--out", out, "Write the table as CSV");

  PldConfig pld;
  std::string r_list = "2,3,4,5,6,7,8";
  bool no_psi = false, stationary_level = false;
  auto* pc = check->add_subcommand("pld", "Monte Carlo tail probabilities of the likelihood-ratio field");
  pc->add_option("--T", pld.horizon, "Horizon")->capture_default_str();
  pc->add_option("--step", pld.step, "Observation step")->capture_default_str();
  pc->add_option("--refine", pld.refine, "Simulation refinement factor")->capture_default_str();
  pc->add_option("--r-list", r_list, "Comma-separated radii")->capture_default_str();
  pc->add_option("--exponent", pld.exponent, "Exponent in the threshold exp(-r^(2-e)/2)")->capture_default_str();
  pc->add_option("--reps", pld.reps, "Replications")->capture_default_str();
  pc->add_option("--seed", seed, "Master seed");
  pc->add_option("--jobs", jobs, "Worker threads");
  pc->add_flag("--no-psi", no_psi, "Do not condition on the localisation flag");
  pc->add_flag("--stationary-level", stationary_level, "Scale the localisation threshold by E[H1^r*]");
  pc->add_option("--out", out, "Write the table as CSV");

  PsiOptions psi_opts;
  double psi_T = 100.0;
  std::size_t psi_reps = 2000;
  auto* sc = check->add_subcommand("psi", "Localisation flag over independent environments");
  sc->add_option("--T", psi_T, "Horizon")->capture_default_str();
  sc->add_option("--reps", psi_reps, "Environments")->capture_default_str();
  sc->add_option("--r-star", psi_opts.r_star, "Envelope power r*")->capture_default_str();
  sc->add_option("--eps-star", psi_opts.eps_star, "Growth exponent eps*")->capture_default_str();
  sc->add_option("--n-inner", psi_opts.n_inner, "Inner Monte Carlo paths")->capture_default_str();
  sc->add_option("--level", psi_opts.level, "Threshold level (threshold = level * T^eps*)")->capture_default_str();
  sc->add_flag("--stationary-level", stationary_level, "Use E[H1^r*] under the stationary law as the level");
  sc->add_option("--seed", seed, "Master seed");
  sc->add_option("--jobs", jobs, "Worker threads");
  sc->add_option("--out", out, "Write the per-environment table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto check_seed = [&](std::uint64_t fallback) {
    ExperimentConfig tmp;
    tmp.seed = fallback;
    apply_seed(tmp, seed);
    return tmp.seed;
  };

  try {
    if (*sim) return cmd_simulate(config, out, seed);
    if (*est) return cmd_estimate(config, paths, out);
    if (*mc) return cmd_mc(config, out, seed, jobs, reps);
    if (*rep) return cmd_report(in_dir, out);
    if (*b1) return cmd_check_b1(alpha, rho, set, L, out);
    if (*rc) {
      ros.n_list = parse_size_list(n_list);
      ros.seed = check_seed(1);
      ros.jobs = jobs ? jobs : 1;
      const auto rows = rosenthal_mc_check(ros);
      std::ostringstream csv;
      write_rosenthal_csv(csv, rows);
      std::cout << csv.str();
      if (!out.empty()) write_text(out, csv.str());
      return 0;
    }
    if (*pc) {
      pld.r_list = parse_double_list(r_list);
      pld.seed = check_seed(1);
      pld.jobs = jobs ? jobs : 1;
      pld.use_psi = !no_psi;
      if (stationary_level) pld.psi.level = stationary_envelope_moment(pld.model, pld.psi.r_star);
      const PldReport report = pld_tail_mc(pld);
      std::ostringstream csv;
      write_pld_csv(csv, report);
      std::cout << csv.str() << "psi pass fraction " << fmt(report.psi_pass_fraction) << ", log-log slope "
                << fmt(pld_log_slope(report)) << "\n";
      if (!out.empty()) write_text(out, csv.str());
      return 0;
    }
    if (*sc) {
      const ErgodicModelSpec model = ErgodicModelSpec::reference(1);
      if (stationary_level) psi_opts.level = stationary_envelope_moment(model, psi_opts.r_star);
      const auto rows = psi_study(model, psi_T, psi_reps, psi_opts, check_seed(1), jobs ? jobs : 1);
      std::size_t zeros = 0;
      for (const auto& r : rows) zeros += r.psi == 0 ? 1 : 0;
      std::ostringstream csv;
      write_psi_csv(csv, rows);
      if (!out.empty()) write_text(out, csv.str());
      std::cout << "environments " << rows.size() << ", psi = 0 in " << zeros << " (fraction "
                << fmt(static_cast<double>(zeros) / static_cast<double>(rows.size())) << "), level "
                << fmt(psi_opts.level, 6) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return 3;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
