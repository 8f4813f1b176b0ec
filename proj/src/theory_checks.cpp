#include "pqla/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "pqla/parallel.hpp"
#include "pqla/path_io.hpp"
#include "pqla/process_sim.hpp"
#include "pqla/stats.hpp"

namespace pqla {

// ---------------------------------------------------------------------------
// Exponent conditions
// ---------------------------------------------------------------------------

B1Params B1Params::set_i(double alpha, double rho) {
  return B1Params{alpha, rho, alpha / 2.0, alpha, 3.0 * alpha, alpha};
}

B1Params B1Params::set_ii(double alpha, double rho) {
  B1Params p = set_i(alpha, rho);
  p.beta2 = 0.0;
  return p;
}

B1Params B1Params::from_set(const std::string& set, double alpha, double rho) {
  if (set == "i") return set_i(alpha, rho);
  if (set == "ii") return set_ii(alpha, rho);
  throw std::invalid_argument("unknown parameter set '" + set + "' (expected i or ii)");
}

bool B1Report::pass() const {
  return std::all_of(constraints.begin(), constraints.end(), [](const B1Constraint& c) { return c.pass; });
}

B1Report check_b1(const B1Params& q) {
  if (!(q.alpha > 0.0 && q.alpha < 1.0)) throw std::invalid_argument("B1: alpha must be in (0, 1)");
  if (!(q.rho > 0.0)) throw std::invalid_argument("B1: rho must be > 0");
  const double beta = q.beta();
  const double rho1_cap = std::min({1.0, beta, 2.0 * q.beta1 / (1.0 - q.alpha)});
  B1Report r;
  r.constraints.push_back({"0<beta1<1/2", q.beta1, 0.5, q.beta1 > 0.0 && q.beta1 < 0.5});
  r.constraints.push_back({"0<rho1<min(1,beta,2beta1/(1-alpha))", q.rho1, rho1_cap, q.rho1 > 0.0 && q.rho1 < rho1_cap});
  r.constraints.push_back({"alpha*rho<rho2", q.alpha * q.rho, q.rho2, q.alpha * q.rho < q.rho2});
  r.constraints.push_back({"beta2>=0", q.beta2, 0.0, q.beta2 >= 0.0});
  const double slack = 1.0 - 2.0 * q.beta2 - q.rho2;
  r.constraints.push_back({"1-2beta2-rho2>0", slack, 0.0, slack > 0.0});
  return r;
}

MomentOrders moment_orders(double L, const B1Params& q) {
  if (!(L > 0.0)) throw std::invalid_argument("moment orders: L must be > 0");
  if (!check_b1(q).pass()) throw std::invalid_argument("moment orders: parameters violate the exponent conditions");
  MomentOrders m;
  m.L = L;
  m.m1 = L / (1.0 - q.rho1);
  m.m2 = L / (1.0 - 2.0 * q.beta2 - q.rho2);
  m.m3 = L / (q.beta() - q.rho1);
  m.m4 = L / (2.0 * q.beta1 / (1.0 - q.alpha) - q.rho1);
  return m;
}

// ---------------------------------------------------------------------------
// Mixing profiles and the Rosenthal bracket
// ---------------------------------------------------------------------------

MixingProfile MixingProfile::ou(const OUSpec& spec, double block, double constant) {
  spec.validate();
  return MixingProfile{[spec, block, constant](std::size_t h) {
                         return mixing_alpha_bound(spec, block * static_cast<double>(h), constant);
                       },
                       MixingSource::kOU};
}

MixingProfile MixingProfile::slow_gaussian(const SlowMixSpec& spec, double block) {
  spec.validate();
  return MixingProfile{[spec, block](std::size_t h) { return mixing_alpha_bound(spec, block * static_cast<double>(h)); },
                       MixingSource::kSlowGaussian};
}

MixingProfile MixingProfile::constant(double value) {
  return MixingProfile{[value](std::size_t) { return value; }, MixingSource::kUser};
}

MixingProfile MixingProfile::table(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("mixing profile: empty table");
  return MixingProfile{[values = std::move(values)](std::size_t h) {
                         return values[std::min(h == 0 ? 0 : h - 1, values.size() - 1)];
                       },
                       MixingSource::kUser};
}

void MixingProfile::validate(std::size_t max_lag) const {
  if (!alpha) throw std::invalid_argument("mixing profile: no bound function");
  double prev = 0.5;
  for (std::size_t h = 1; h <= max_lag; ++h) {
    const double a = alpha(h);
    if (!(a >= 0.0 && a <= 0.5)) {
      throw std::invalid_argument("mixing profile: alpha(" + std::to_string(h) + ") outside [0, 1/2]");
    }
    if (a > prev) throw std::invalid_argument("mixing profile: not nonincreasing at lag " + std::to_string(h));
    prev = a;
  }
}

double rosenthal_rhs(double p, double r, std::size_t n, const MixingProfile& profile) {
  if (!(p >= 2.0)) throw std::invalid_argument("rosenthal: p must be >= 2");
  if (!(p < r)) throw std::invalid_argument("rosenthal: need p < r");
  if (n < 2) throw std::invalid_argument("rosenthal: need n >= 2");
  profile.validate(n - 1);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t h = 1; h < n; ++h) {
    const double a = profile.alpha(h);
    s1 += std::pow(a, 1.0 - 2.0 / r);
    s2 += std::pow(static_cast<double>(h + 1), p - 2.0) * std::pow(a, 1.0 - p / r);
  }
  const double nd = static_cast<double>(n);
  return std::pow(nd, p / 2.0) * std::pow(1.0 + s1, p / 2.0) + nd * s2;
}

std::vector<RosenthalRow> rosenthal_mc(const SequenceGenerator& generator, double p, double r,
                                       const std::vector<std::size_t>& n_list, std::size_t reps, std::uint64_t seed,
                                       const MixingProfile& profile, unsigned jobs) {
  if (reps < 2) throw std::invalid_argument("rosenthal: need at least 2 replications");
  std::vector<RosenthalRow> rows;
  for (std::size_t n : n_list) {
    const double bracket = rosenthal_rhs(p, r, n, profile);
    std::vector<double> max_p(reps), final_p(reps), moment_r(reps);
    parallel_for(reps, jobs, [&](std::size_t i) {
      Engine engine = make_engine(derive_seed(seed, Stream::kRosenthal, (static_cast<std::uint64_t>(n) << 32) + i));
      const std::vector<double> x = generator(n, engine);
      if (x.size() != n) throw std::runtime_error("rosenthal: generator returned the wrong length");
      double s = 0.0, best = 0.0, mr = 0.0;
      for (double v : x) {
        s += v;
        best = std::max(best, std::pow(std::abs(s), p));
        mr += std::pow(std::abs(v), r);
      }
      max_p[i] = best;
      final_p[i] = std::pow(std::abs(s), p);
      moment_r[i] = mr / static_cast<double>(n);
    });
    RosenthalRow row;
    row.n = n;
    const Estimate lhs = mean_with_se(max_p);
    row.lhs = lhs.value;
    row.lhs_se = lhs.se;
    row.lhs_final = mean(final_p);
    row.moment = std::pow(mean(moment_r), p / r);
    row.bracket = bracket;
    row.ratio = row.moment > 0.0 ? row.lhs / (row.moment * row.bracket) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<RosenthalRow> rosenthal_mc_check(const RosenthalConfig& c) {
  c.ou.validate();
  if (!c.f) throw std::invalid_argument("rosenthal: functional f is required");
  if (!(c.block_length > 0.0) || c.steps_per_block < 1) throw std::invalid_argument("rosenthal: bad block layout");
  const double sd = std::sqrt(c.ou.stationary_variance());
  const Quadrature gh = gauss_hermite(80);
  double centre = 0.0;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) centre += gh.weights[k] * c.f(sd * gh.nodes[k]);

  const double dt = c.block_length / static_cast<double>(c.steps_per_block);
  const double decay = std::exp(-c.ou.kappa * dt);
  const double innov = sd * std::sqrt(1.0 - decay * decay);
  const auto f = c.f;
  const std::size_t m = c.steps_per_block;
  const double block = c.block_length;
  SequenceGenerator gen = [=](std::size_t n, Engine& engine) {
    std::normal_distribution<double> normal;
    std::vector<double> x(n);
    double u = sd * normal(engine);
    double fu = f(u);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        u = decay * u + innov * normal(engine);
        const double fn = f(u);
        acc += 0.5 * (fu + fn) * dt;
        fu = fn;
      }
      x[j] = acc - block * centre;
    }
    return x;
  };
  return rosenthal_mc(gen, c.p, c.r, c.n_list, c.reps, c.seed, MixingProfile::ou(c.ou, c.block_length), c.jobs);
}

// ---------------------------------------------------------------------------
// Localisation functional
// ---------------------------------------------------------------------------

PsiResult psi_truncation(std::span<const double> L, double step, const std::function<double(double, double)>& envelope,
                         const OUSpec& ou, double horizon, const PsiOptions& o, std::uint64_t seed) {
  if (!(o.r_star >= 2.0)) throw std::invalid_argument("psi: r* must be >= 2");
  if (!(o.eps_star > 0.0)) throw std::invalid_argument("psi: eps* must be > 0");
  if (o.n_inner < 1) throw std::invalid_argument("psi: need at least one inner path");
  if (!(step > 0.0) || !(horizon > 0.0) || !(o.inner_step > 0.0)) throw std::invalid_argument("psi: bad time layout");
  if (!envelope) throw std::invalid_argument("psi: envelope is required");
  ou.validate();
  const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(o.inner_step / step)));
  const double dt = static_cast<double>(stride) * step;
  const auto points = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  if (L.size() < (points - 1) * stride + 1) throw std::invalid_argument("psi: environment path is shorter than T");
  const auto n_blocks = static_cast<std::size_t>(std::ceil(horizon - 1e-9));

  std::vector<double> l(points);
  std::vector<std::size_t> block(points);
  for (std::size_t k = 0; k < points; ++k) {
    l[k] = L[k * stride];
    block[k] = std::min(n_blocks - 1, static_cast<std::size_t>(std::floor(static_cast<double>(k) * dt + 1e-9)));
  }
  const double sd = std::sqrt(ou.stationary_variance());
  const double decay = std::exp(-ou.kappa * dt);
  const double innov = sd * std::sqrt(1.0 - decay * decay);

  std::vector<double> acc(n_blocks, 0.0);
  for (std::size_t i = 0; i < o.n_inner; ++i) {
    Engine engine = make_engine(derive_seed(seed, Stream::kPsi, i));
    std::normal_distribution<double> normal;
    double u = sd * normal(engine);
    for (std::size_t k = 0; k < points; ++k) {
      acc[block[k]] += std::pow(envelope(l[k], u), o.r_star) * dt;
      u = decay * u + innov * normal(engine);
    }
  }
  PsiResult res;
  res.blocks.resize(n_blocks);
  for (std::size_t j = 0; j < n_blocks; ++j) res.blocks[j] = acc[j] / static_cast<double>(o.n_inner);
  res.max_block = *std::max_element(res.blocks.begin(), res.blocks.end());
  res.psi = res.max_block <= o.level * std::pow(horizon, o.eps_star) ? 1 : 0;
  return res;
}

PsiResult psi_truncation(std::span<const double> L, double step, const ErgodicModelSpec& model, double horizon,
                         const PsiOptions& options, std::uint64_t seed) {
  return psi_truncation(L, step, model.envelope, model.ou, horizon, options, seed);
}

double stationary_envelope_moment(const ErgodicModelSpec& model, double power, std::size_t nodes) {
  if (!model.envelope) throw std::invalid_argument("envelope moment: model has no envelope");
  const Quadrature gh = gauss_hermite(nodes);
  const double sl = std::sqrt(model.slow.covariance(0.0));
  const double su = std::sqrt(model.ou.stationary_variance());
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = 0; j < nodes; ++j) {
      sum += gh.weights[i] * gh.weights[j] * std::pow(model.envelope(sl * gh.nodes[i], su * gh.nodes[j]), power);
    }
  }
  return sum;
}

std::vector<PsiStudyRow> psi_study(const ErgodicModelSpec& model, double horizon, std::size_t reps,
                                   const PsiOptions& options, std::uint64_t seed, unsigned jobs) {
  const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / options.inner_step - 1e-9));
  const TimeGrid grid(horizon, std::max<std::size_t>(2, n_steps));
  const CirculantEmbedding embedding(model.slow, grid);
  std::vector<PsiStudyRow> rows(reps);
  parallel_for(reps, jobs, [&](std::size_t i) {
    Engine engine = make_engine(derive_seed(seed, Stream::kEnvironment, i));
    const std::vector<double> L = embedding.sample(engine);
    const PsiResult r = psi_truncation(L, grid.step(), model, horizon, options, derive_seed(seed, Stream::kPsi, i));
    rows[i] = PsiStudyRow{i, r.psi, r.max_block};
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Polynomial large-deviation tails
// ---------------------------------------------------------------------------

double pld_threshold(double r, double exponent) { return std::exp(-0.5 * std::pow(r, 2.0 - exponent)); }

std::vector<double> pld_sup_log_z(const FieldEval& eval, const std::vector<double>& r_list, double spacing) {
  const std::vector<Vector> grid = local_grid(eval, spacing);
  std::vector<std::pair<double, double>> pts;  // (|u|, log Z)
  pts.reserve(grid.size());
  for (const Vector& u : grid) pts.emplace_back(u.norm(), eval.log_z(u));
  std::sort(pts.begin(), pts.end());
  // suffix maxima over decreasing |u|
  std::vector<double> suffix(pts.size() + 1, -std::numeric_limits<double>::infinity());
  for (std::size_t k = pts.size(); k-- > 0;) suffix[k] = std::max(suffix[k + 1], pts[k].second);
  std::vector<double> out;
  for (double r : r_list) {
    const auto it = std::lower_bound(pts.begin(), pts.end(), std::make_pair(r - 1e-12, -std::numeric_limits<double>::infinity()));
    out.push_back(suffix[static_cast<std::size_t>(it - pts.begin())]);
  }
  return out;
}

PldReport pld_tail_mc(const PldConfig& c) {
  if (!(c.spacing > 0.0 && c.spacing <= 0.05 + 1e-15)) {
    throw std::invalid_argument("PLD: lattice spacing must give at least 20 points per unit of u");
  }
  if (c.reps < 1) throw std::invalid_argument("PLD: need at least one replication");
  const auto n_steps = static_cast<std::size_t>(std::llround(c.horizon / c.step));
  const TimeGrid grid(c.horizon, n_steps);
  RegressionOptions ro;
  ro.refine = c.refine;
  const RegressionSimulator sim(c.model, grid, ro);
  const Vector rate = Vector::Constant(static_cast<Eigen::Index>(c.model.dim()), 1.0 / std::sqrt(c.horizon));

  std::vector<std::vector<double>> sups(c.reps);
  std::vector<int> psi(c.reps, 1);
  parallel_for(c.reps, c.jobs, [&](std::size_t i) {
    const std::uint64_t rep_seed = derive_seed(c.seed, Stream::kReplication, i);
    const RegressionPaths paths = sim.simulate(rep_seed);
    const FieldEval eval(make_regression_field(paths, c.model), c.model.box, c.model.theta_star, rate, 0);
    sups[i] = pld_sup_log_z(eval, c.r_list, c.spacing);
    if (c.use_psi) {
      psi[i] = psi_truncation(paths.L.values, grid.step(), c.model, c.horizon, c.psi,
                              derive_seed(rep_seed, Stream::kPsi))
                   .psi;
    }
  });

  PldReport rep;
  rep.reps = c.reps;
  rep.spacing = c.spacing;
  rep.exponent = c.exponent;
  std::size_t kept = 0;
  for (int v : psi) kept += static_cast<std::size_t>(v);
  rep.psi_pass_fraction = static_cast<double>(kept) / static_cast<double>(c.reps);
  for (std::size_t k = 0; k < c.r_list.size(); ++k) {
    PldRow row;
    row.r = c.r_list[k];
    row.threshold = pld_threshold(row.r, c.exponent);
    const double log_thr = -0.5 * std::pow(row.r, 2.0 - c.exponent);
    std::size_t hits = 0, empties = 0;
    for (std::size_t i = 0; i < c.reps; ++i) {
      if (!psi[i]) continue;
      if (std::isinf(sups[i][k]) && sups[i][k] < 0) ++empties;
      if (sups[i][k] >= log_thr) ++hits;
    }
    row.n_eff = kept;
    row.empty = kept > 0 && empties == kept;
    if (kept > 0) {
      row.prob = static_cast<double>(hits) / static_cast<double>(kept);
      row.se = std::sqrt(row.prob * (1.0 - row.prob) / static_cast<double>(kept));
    }
    rep.rows.push_back(row);
  }
  return rep;
}

double pld_log_slope(const PldReport& report) {
  std::vector<double> x, y;
  for (const auto& row : report.rows) {
    if (row.prob > 0.0 && row.r > 0.0) {
      x.push_back(std::log(row.r));
      y.push_back(std::log(row.prob));
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return fit_line(x, y).slope;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_b1_csv(std::ostream& out, const B1Report& report) {
  out << "constraint,lhs,rhs,pass\n";
  for (const auto& c : report.constraints) {
    out << c.name << ',' << format_double(c.lhs) << ',' << format_double(c.rhs) << ',' << (c.pass ? 1 : 0) << '\n';
  }
}

void write_rosenthal_csv(std::ostream& out, const std::vector<RosenthalRow>& rows) {
  out << "n,lhs,bracket,ratio\n";
  for (const auto& r : rows) {
    out << r.n << ',' << format_double(r.lhs) << ',' << format_double(r.bracket) << ',' << format_double(r.ratio)
        << '\n';
  }
}

void write_pld_csv(std::ostream& out, const PldReport& report) {
  out << "r,threshold,prob,se,n_eff\n";
  for (const auto& r : report.rows) {
    out << format_double(r.r) << ',' << format_double(r.threshold) << ',' << format_double(r.prob) << ','
        << format_double(r.se) << ',' << r.n_eff << '\n';
  }
}

void write_psi_csv(std::ostream& out, const std::vector<PsiStudyRow>& rows) {
  out << "rep,psi,max_block\n";
  for (const auto& r : rows) out << r.rep << ',' << r.psi << ',' << format_double(r.max_block) << '\n';
}

}  // namespace pqla
