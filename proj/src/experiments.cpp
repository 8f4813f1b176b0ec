#include "pqla/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pqla/error.hpp"
#include "pqla/parallel.hpp"
#include "pqla/path_io.hpp"
#include "pqla/process_sim.hpp"

namespace pqla {

std::string to_string(ModelKind kind) { return kind == ModelKind::kRegression ? "regression" : "volatility"; }

std::string to_string(Conditioning mode) {
  return mode == Conditioning::kUnconditional ? "unconditional" : "fixed-environment";
}

std::string to_string(Studentization mode) { return mode == Studentization::kLimit ? "limit" : "per-replication"; }

ModelKind model_kind_from_string(const std::string& text) {
  if (text == "regression") return ModelKind::kRegression;
  if (text == "volatility") return ModelKind::kVolatility;
  throw std::invalid_argument("unknown model kind '" + text + "' (expected regression or volatility)");
}

Conditioning conditioning_from_string(const std::string& text) {
  if (text == "unconditional") return Conditioning::kUnconditional;
  if (text == "fixed-environment") return Conditioning::kFixedEnvironment;
  throw std::invalid_argument("unknown conditioning mode '" + text + "'");
}

Studentization studentization_from_string(const std::string& text) {
  if (text == "limit") return Studentization::kLimit;
  if (text == "per-replication") return Studentization::kPerReplication;
  throw std::invalid_argument("unknown studentization '" + text + "'");
}

ErgodicModelSpec ModelConfig::regression() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("regression model: dim must be 1 or 2");
  ErgodicModelSpec m = ErgodicModelSpec::reference(dim);
  if (!theta_star.empty()) {
    if (theta_star.size() != dim) throw std::invalid_argument("regression model: theta_star has the wrong length");
    m.theta_star = Eigen::Map<const Vector>(theta_star.data(), static_cast<Eigen::Index>(dim));
  }
  m.ou.kappa = ou_kappa;
  m.ou.s = ou_s;
  m.slow.a = slow_a;
  m.validate();
  return m;
}

VolEnvModelSpec ModelConfig::volatility() const {
  if (dim != 1) throw std::invalid_argument("volatility model: dim must be 1");
  if (theta_star.size() > 1) throw std::invalid_argument("volatility model: theta_star has the wrong length");
  VolEnvModelSpec m = VolEnvModelSpec::remark(theta_star.empty() ? 1.0 : theta_star[0]);
  m.x0 = x0;
  m.explosion_guard = explosion_guard;
  m.validate();
  return m;
}

Studentization ExperimentConfig::studentization() const {
  if (studentize) return *studentize;
  return model.kind == ModelKind::kRegression ? Studentization::kLimit : Studentization::kPerReplication;
}

void ExperimentConfig::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("experiment: horizon must be > 0");
  if (reps < 1) throw std::invalid_argument("experiment: reps must be >= 1");
  if (refine < 1) throw std::invalid_argument("experiment: refine must be >= 1");
  if (jobs < 1) throw std::invalid_argument("experiment: jobs must be >= 1");
  if (estimators.empty()) throw std::invalid_argument("experiment: no estimators selected");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    for (std::size_t j = i + 1; j < estimators.size(); ++j) {
      if (estimators[i] == estimators[j]) throw std::invalid_argument("experiment: duplicate estimator");
    }
  }
  if (model.kind == ModelKind::kRegression) {
    if (!(step > 0.0)) throw std::invalid_argument("experiment: step must be > 0");
    const double n = horizon / step;
    if (std::abs(n - std::round(n)) > 1e-6 * n || std::round(n) < 2) {
      throw std::invalid_argument("experiment: horizon / step must be an integer >= 2");
    }
    if (limit_mc < 10000) throw std::invalid_argument("experiment: limit_mc must be >= 10^4");
    (void)model.regression();
  } else {
    if (n_obs < 2) throw std::invalid_argument("experiment: n_obs must be >= 2");
    if (studentization() == Studentization::kLimit) {
      throw std::invalid_argument("experiment: the volatility model is studentized per replication");
    }
    if (compute_psi) throw std::invalid_argument("experiment: psi is defined for the regression model only");
    (void)model.volatility();
  }
}

Matrix limit_gamma(const ErgodicModelSpec& model, std::size_t n_mc, std::uint64_t seed) {
  return limit_field(model, ThetaGrid::over(model.box, 2), n_mc, seed).gamma;
}

Matrix volatility_gamma(const VolEnvPaths& paths, const VolEnvModelSpec& model, const Vector& theta) {
  const std::size_t n = paths.grid().n_steps();
  const auto p = theta.size();
  Matrix g = Matrix::Zero(p, p);
  for (std::size_t j = 0; j < n; ++j) {
    const double env = paths.env.values[j], x = paths.X.values[j];
    const Vector d = model.variance_grad(env, x, theta) / model.variance(env, x, theta);
    g += 0.5 * d * d.transpose();
  }
  return g / static_cast<double>(n);
}

namespace {

Vector nan_vector(std::size_t p) {
  return Vector::Constant(static_cast<Eigen::Index>(p), std::numeric_limits<double>::quiet_NaN());
}

EstimateRecord run_estimator(EstimatorKind kind, const FieldEval& eval, const ExperimentConfig& c) {
  EstimateRecord rec = kind == EstimatorKind::kQmle ? qmle(eval.field(), eval.box(), c.qmle)
                                                    : qbe(eval.field(), Prior::uniform(), eval.box(), c.qbe);
  localize(rec, eval);
  return rec;
}

MCRow make_row(std::size_t rep, const EstimateRecord& rec, const Matrix& root, int psi, std::uint64_t env_hash) {
  MCRow row;
  row.rep = rep;
  row.kind = rec.kind;
  row.theta_hat = rec.theta_hat;
  row.u_hat = rec.u_hat;
  row.z = root * rec.u_hat;
  row.psi = psi;
  row.boundary = rec.boundary_flag;
  row.mass_logZ = rec.mass_logZ;
  row.env_hash = env_hash;
  return row;
}

MCRow failed_row(std::size_t rep, EstimatorKind kind, std::size_t p, std::uint64_t env_hash) {
  MCRow row;
  row.rep = rep;
  row.kind = kind;
  row.theta_hat = row.u_hat = row.z = nan_vector(p);
  row.psi = 0;
  row.env_hash = env_hash;
  row.failed = true;
  return row;
}

}  // namespace

MCReport mc_estimate(const ExperimentConfig& c) {
  c.validate();
  MCReport report;
  report.config = c;
  const std::size_t K = c.estimators.size();
  const std::size_t p = c.model.dim;
  report.rows.resize(c.reps * K);
  const bool fixed = c.conditioning == Conditioning::kFixedEnvironment;
  const std::uint64_t shared_env_seed = derive_seed(c.seed, Stream::kEnvironment, 0);
  const bool per_rep = c.studentization() == Studentization::kPerReplication;
  Matrix gamma;

  if (c.model.kind == ModelKind::kRegression) {
    const ErgodicModelSpec model = c.model.regression();
    const TimeGrid grid(c.horizon, static_cast<std::size_t>(std::llround(c.horizon / c.step)));
    RegressionOptions ro;
    ro.refine = c.refine;
    const RegressionSimulator sim(model, grid, ro);
    gamma = limit_gamma(model, c.limit_mc, c.seed);
    const Matrix gamma_root = sqrt_spd(gamma);
    const Vector rate = Vector::Constant(static_cast<Eigen::Index>(p), 1.0 / std::sqrt(c.horizon));

    PsiOptions psi_options = c.psi;
    if (c.compute_psi && c.psi_stationary_level) {
      psi_options.level = stationary_envelope_moment(model, psi_options.r_star);
    }
    std::vector<double> shared_env;
    int shared_psi = 1;
    if (fixed) {
      shared_env = sim.environment(shared_env_seed);
      if (c.compute_psi) {
        shared_psi = psi_truncation(shared_env, sim.fine_grid().step(), model, c.horizon, psi_options,
                                    derive_seed(c.seed, Stream::kPsi, 0))
                         .psi;
      }
    }
    parallel_for(c.reps, c.jobs, [&](std::size_t i) {
      const std::uint64_t rep_seed = derive_seed(c.seed, Stream::kReplication, i);
      std::vector<double> own_env;
      std::uint64_t env_seed = shared_env_seed;
      if (!fixed) {
        env_seed = derive_seed(rep_seed, Stream::kEnvironment);
        own_env = sim.environment(env_seed);
      }
      const std::vector<double>& env = fixed ? shared_env : own_env;
      const RegressionPaths paths = sim.simulate_in_environment(env, env_seed, rep_seed);
      const std::uint64_t env_hash = hash_values(env);
      int psi = shared_psi;
      if (c.compute_psi && !fixed) {
        psi = psi_truncation(env, sim.fine_grid().step(), model, c.horizon, psi_options,
                             derive_seed(rep_seed, Stream::kPsi))
                  .psi;
      }
      const FieldEval eval(make_regression_field(paths, model, c.linear_fast_path), model.box, model.theta_star, rate,
                           0);
      for (std::size_t k = 0; k < K; ++k) {
        const EstimateRecord rec = run_estimator(c.estimators[k], eval, c);
        const Matrix root = per_rep ? sqrt_spd(rec.gamma_T) : gamma_root;
        report.rows[i * K + k] = make_row(i, rec, root, psi, env_hash);
      }
    });
  } else {
    const VolEnvModelSpec model = c.model.volatility();
    const TimeGrid grid(c.horizon, c.n_obs);
    VolEnvOptions vo;
    vo.refine = c.refine;
    const VolEnvSimulator sim(model, grid, vo);
    const Vector rate = Vector::Constant(1, 1.0 / std::sqrt(static_cast<double>(c.n_obs)));
    std::vector<double> shared_env;
    if (fixed) shared_env = sim.environment(shared_env_seed);
    std::vector<Matrix> gammas(c.reps);
    parallel_for(c.reps, c.jobs, [&](std::size_t i) {
      const std::uint64_t rep_seed = derive_seed(c.seed, Stream::kReplication, i);
      std::vector<double> own_env;
      std::uint64_t env_seed = shared_env_seed;
      if (!fixed) {
        env_seed = derive_seed(rep_seed, Stream::kEnvironment);
        own_env = sim.environment(env_seed);
      }
      const std::vector<double>& env = fixed ? shared_env : own_env;
      const std::uint64_t env_hash = hash_values(env);
      VolEnvPaths paths;
      try {
        paths = sim.simulate_in_environment(env, env_seed, rep_seed);
      } catch (const ExplosionError&) {
        for (std::size_t k = 0; k < K; ++k) report.rows[i * K + k] = failed_row(i, c.estimators[k], p, env_hash);
        return;
      }
      const FieldEval eval(make_volatility_field(paths, model), model.box, model.theta_star, rate, 0);
      gammas[i] = volatility_gamma(paths, model, model.theta_star);
      const Matrix root = sqrt_spd(gammas[i]);
      for (std::size_t k = 0; k < K; ++k) {
        const EstimateRecord rec = run_estimator(c.estimators[k], eval, c);
        report.rows[i * K + k] = make_row(i, rec, root, 1, env_hash);
      }
    });
    gamma = Matrix::Zero(1, 1);
    std::size_t ok = 0;
    for (const auto& g : gammas) {
      if (g.size() == 0) continue;
      gamma += g;
      ++ok;
    }
    if (ok > 0) gamma /= static_cast<double>(ok);
  }
  report.summary = summarize(report.rows, c.estimators, gamma);
  return report;
}

MCSummary summarize(const std::vector<MCRow>& rows, const std::vector<EstimatorKind>& kinds, const Matrix& gamma,
                    double level) {
  MCSummary s;
  s.level = level;
  s.gamma = gamma;
  if (kinds.empty()) throw std::invalid_argument("summary: no estimator kinds");
  s.reps = rows.size() / kinds.size();
  for (const auto& r : rows) {
    if (r.failed && r.kind == kinds.front()) ++s.failures;
  }
  s.failure_rate = s.reps ? static_cast<double>(s.failures) / static_cast<double>(s.reps) : 0.0;

  for (EstimatorKind kind : kinds) {
    EstimatorSummary e;
    e.kind = kind;
    std::vector<const MCRow*> ok;
    for (const auto& r : rows) {
      if (r.kind != kind) continue;
      if (r.failed) {
        ++e.n_failed;
      } else {
        ok.push_back(&r);
      }
    }
    e.n_ok = ok.size();
    if (!ok.empty()) {
      const auto p = ok.front()->u_hat.size();
      e.mean_u = Vector::Zero(p);
      for (const MCRow* r : ok) e.mean_u += r->u_hat;
      e.mean_u /= static_cast<double>(ok.size());
      e.cov_u = Matrix::Zero(p, p);
      if (ok.size() > 1) {
        for (const MCRow* r : ok) {
          const Vector d = r->u_hat - e.mean_u;
          e.cov_u += d * d.transpose();
        }
        e.cov_u /= static_cast<double>(ok.size() - 1);
      }
      for (Eigen::Index k = 0; k < p; ++k) {
        std::vector<double> z;
        for (const MCRow* r : ok) z.push_back(r->z[k]);
        try {
          e.ks.push_back(ks_normal(z, level));
        } catch (const std::invalid_argument&) {
          e.ks.push_back(KSResult{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                                  z.size(), false});
        }
      }
      std::size_t psi_ok = 0, boundary = 0;
      std::vector<double> inv_mass;
      for (const MCRow* r : ok) {
        psi_ok += r->psi == 1 ? 1 : 0;
        boundary += r->boundary ? 1 : 0;
        if (std::isfinite(r->mass_logZ)) inv_mass.push_back(std::exp(-r->mass_logZ));
      }
      e.psi_pass_rate = static_cast<double>(psi_ok) / static_cast<double>(ok.size());
      e.boundary_rate = static_cast<double>(boundary) / static_cast<double>(ok.size());
      if (!inv_mass.empty()) {
        e.inverse_mass_quantiles = {quantile(inv_mass, 0.05), quantile(inv_mass, 0.5), quantile(inv_mass, 0.95)};
      }
    }
    s.estimators.push_back(std::move(e));
  }
  return s;
}

namespace {

nlohmann::json vec_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

nlohmann::json mat_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec_json(m.row(r).transpose()));
  return out;
}

Matrix mat_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      m(r, c) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    }
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const MCSummary& s) {
  nlohmann::json j;
  j["level"] = s.level;
  j["reps"] = s.reps;
  j["failures"] = s.failures;
  j["failure_rate"] = s.failure_rate;
  j["gamma"] = mat_json(s.gamma);
  j["estimators"] = nlohmann::json::array();
  for (const auto& e : s.estimators) {
    nlohmann::json ej;
    ej["kind"] = to_string(e.kind);
    ej["n_ok"] = e.n_ok;
    ej["n_failed"] = e.n_failed;
    ej["mean_u"] = vec_json(e.mean_u);
    ej["cov_u"] = mat_json(e.cov_u);
    ej["ks"] = nlohmann::json::array();
    for (const auto& k : e.ks) {
      ej["ks"].push_back({{"statistic", k.statistic}, {"p_value", k.p_value}, {"n", k.n}, {"pass", k.pass}});
    }
    ej["psi_pass_rate"] = e.psi_pass_rate;
    ej["boundary_rate"] = e.boundary_rate;
    ej["inverse_mass_quantiles"] = e.inverse_mass_quantiles;
    j["estimators"].push_back(ej);
  }
  return j;
}

std::vector<KSResult> normality_test(const MCReport& report, EstimatorKind kind, double level) {
  std::vector<const MCRow*> ok;
  for (const auto& r : report.rows) {
    if (r.kind == kind && !r.failed) ok.push_back(&r);
  }
  if (ok.size() < 100) throw std::invalid_argument("normality test: need at least 100 successful replications");
  std::vector<KSResult> out;
  for (Eigen::Index k = 0; k < ok.front()->z.size(); ++k) {
    std::vector<double> z;
    for (const MCRow* r : ok) z.push_back(r->z[k]);
    out.push_back(ks_normal(z, level));
  }
  return out;
}

namespace {

double gaussian_abs_moment(double p) {
  return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(M_PI);
}

}  // namespace

std::vector<MomentRow> moment_convergence(const MCReport& report, EstimatorKind kind, const std::vector<double>& p_list,
                                          std::optional<Matrix> gamma_inverse) {
  const Matrix ginv = gamma_inverse ? *gamma_inverse : Matrix(report.summary.gamma.inverse());
  std::vector<const MCRow*> ok;
  for (const auto& r : report.rows) {
    if (r.kind == kind && !r.failed) ok.push_back(&r);
  }
  if (ok.size() < 2) throw std::invalid_argument("moment convergence: need at least 2 successful replications");
  const auto dim = ok.front()->u_hat.size();
  if (ginv.rows() != dim || ginv.cols() != dim) throw std::invalid_argument("moment convergence: Gamma has the wrong shape");
  std::vector<MomentRow> out;
  auto push = [&](std::string name, double p, const std::vector<double>& v, double target) {
    const Estimate e = mean_with_se(v);
    MomentRow row{std::move(name), p, e.value, e.se, target, 0.0};
    row.rel_error = target != 0.0 ? (e.value - target) / target : e.value;
    out.push_back(row);
  };
  for (double p : p_list) {
    const bool integer = p == std::round(p);
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double sd = std::sqrt(ginv(k, k));
      std::vector<double> v;
      for (const MCRow* r : ok) v.push_back(integer ? std::pow(r->u_hat[k], p) : std::pow(std::abs(r->u_hat[k]), p));
      double target = std::pow(sd, p) * gaussian_abs_moment(p);
      if (integer && static_cast<long>(p) % 2 != 0) target = 0.0;
      const std::string base = "u[" + std::to_string(k) + "]";
      push(integer ? base + "^" + format_double(p) : "|" + base + "|^" + format_double(p), p, v, target);
    }
    if (p == 2.0) {
      std::vector<double> v;
      for (const MCRow* r : ok) v.push_back(r->u_hat.squaredNorm());
      push("|u|^2", 2.0, v, ginv.trace());
    }
  }
  return out;
}

std::vector<LaqRow> laq_shrink_study(const LaqConfig& c) {
  if (c.horizons.size() < 3) throw std::invalid_argument("LAQ study: need at least 3 horizons");
  if (c.reps < 1) throw std::invalid_argument("LAQ study: need at least one replication");
  const ErgodicModelSpec model = c.model.regression();
  const Matrix gamma = limit_gamma(model, c.limit_mc, c.seed);
  std::vector<LaqRow> out;
  for (std::size_t t = 0; t < c.horizons.size(); ++t) {
    const double T = c.horizons[t];
    const TimeGrid grid(T, static_cast<std::size_t>(std::llround(T / c.step)));
    RegressionOptions ro;
    ro.refine = c.refine;
    const RegressionSimulator sim(model, grid, ro);
    const Vector rate = Vector::Constant(static_cast<Eigen::Index>(model.dim()), 1.0 / std::sqrt(T));
    const std::uint64_t horizon_seed = derive_seed(c.seed, Stream::kReplication, 1000000 + t);
    std::vector<double> sups(c.reps);
    parallel_for(c.reps, c.jobs, [&](std::size_t i) {
      const RegressionPaths paths = sim.simulate(derive_seed(horizon_seed, Stream::kReplication, i));
      const FieldEval eval(make_regression_field(paths, model, c.linear_fast_path), model.box, model.theta_star, rate,
                           0);
      const LAQDecomp d = laq_decompose(eval, gamma);
      double sup = 0.0;
      for (const Vector& u : local_grid(eval, c.spacing, c.radius * (1.0 + 1e-12))) {
        sup = std::max(sup, std::abs(d.remainder(u)));
      }
      sups[i] = sup;
    });
    out.push_back(LaqRow{T, median(sups), quantile(sups, 0.25), quantile(sups, 0.75)});
  }
  return out;
}

std::vector<double> a5_mass_diagnostic(const MCReport& report) {
  std::vector<double> inv;
  for (const auto& r : report.rows) {
    if (r.kind == EstimatorKind::kQbe && !r.failed && std::isfinite(r.mass_logZ)) inv.push_back(std::exp(-r.mass_logZ));
  }
  if (inv.empty()) throw std::invalid_argument("A5 diagnostic: no QBE rows with a recorded mass");
  return {quantile(inv, 0.05), quantile(inv, 0.5), quantile(inv, 0.95)};
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_rows_csv(std::ostream& out, const std::vector<MCRow>& rows, std::size_t dim) {
  out << "rep,estimator";
  for (std::size_t k = 1; k <= dim; ++k) out << ",theta_hat_" << k;
  for (std::size_t k = 1; k <= dim; ++k) out << ",u_hat_" << k;
  out << ",psi,boundary,mass_logZ,env_hash,failed";
  for (std::size_t k = 1; k <= dim; ++k) out << ",z_" << k;
  out << '\n';
  for (const auto& r : rows) {
    out << r.rep << ',' << to_string(r.kind);
    for (std::size_t k = 0; k < dim; ++k) out << ',' << format_double(r.theta_hat[static_cast<Eigen::Index>(k)]);
    for (std::size_t k = 0; k < dim; ++k) out << ',' << format_double(r.u_hat[static_cast<Eigen::Index>(k)]);
    out << ',' << r.psi << ',' << (r.boundary ? 1 : 0) << ',' << format_double(r.mass_logZ) << ',' << r.env_hash << ','
        << (r.failed ? 1 : 0);
    for (std::size_t k = 0; k < dim; ++k) out << ',' << format_double(r.z[static_cast<Eigen::Index>(k)]);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<MCRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("rows CSV: missing header");
  const auto header = split_csv(line);
  std::size_t dim = 0;
  while (std::find(header.begin(), header.end(), "theta_hat_" + std::to_string(dim + 1)) != header.end()) ++dim;
  if (dim == 0) throw std::runtime_error("rows CSV: no theta_hat columns");
  const std::size_t expected = 2 + 3 * dim + 5;
  if (header.size() != expected) throw std::runtime_error("rows CSV: unexpected header");
  std::vector<MCRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected) {
      throw std::runtime_error("rows CSV line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                               " fields");
    }
    try {
      MCRow r;
      std::size_t c = 0;
      r.rep = std::stoull(cells[c++]);
      r.kind = estimator_kind_from_string(cells[c++]);
      r.theta_hat.resize(static_cast<Eigen::Index>(dim));
      r.u_hat.resize(static_cast<Eigen::Index>(dim));
      r.z.resize(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) r.theta_hat[static_cast<Eigen::Index>(k)] = parse_double(cells[c++]);
      for (std::size_t k = 0; k < dim; ++k) r.u_hat[static_cast<Eigen::Index>(k)] = parse_double(cells[c++]);
      r.psi = std::stoi(cells[c++]);
      r.boundary = cells[c++] == "1";
      r.mass_logZ = parse_double(cells[c++]);
      r.env_hash = std::stoull(cells[c++]);
      r.failed = cells[c++] == "1";
      for (std::size_t k = 0; k < dim; ++k) r.z[static_cast<Eigen::Index>(k)] = parse_double(cells[c++]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("rows CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_report(const MCReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "rows.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "rows.csv").string());
    write_rows_csv(out, report.rows, report.config.model.dim);
  }
  std::ofstream out(dir / "summary.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  out << to_json(report.summary).dump(2) << '\n';
}

MCReport load_report(const std::filesystem::path& dir) {
  std::ifstream rows_in(dir / "rows.csv");
  if (!rows_in) throw std::runtime_error("cannot read " + (dir / "rows.csv").string());
  std::ifstream summary_in(dir / "summary.json");
  if (!summary_in) throw std::runtime_error("cannot read " + (dir / "summary.json").string());
  MCReport report;
  report.rows = read_rows_csv(rows_in);
  const nlohmann::json stored = nlohmann::json::parse(summary_in);
  std::vector<EstimatorKind> kinds;
  for (const auto& e : stored.at("estimators")) kinds.push_back(estimator_kind_from_string(e.at("kind")));
  report.config.estimators = kinds;
  report.config.model.dim = report.rows.empty() ? 1 : static_cast<std::size_t>(report.rows.front().u_hat.size());
  report.summary = summarize(report.rows, kinds, mat_from_json(stored.at("gamma")), stored.at("level").get<double>());
  if (to_json(report.summary) != stored) {
    throw std::runtime_error("summary.json does not match the summary recomputed from rows.csv");
  }
  return report;
}

}  // namespace pqla
