#include "pqla/estimators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pqla/error.hpp"

namespace pqla {

double Prior::log_density(const Vector& theta) const {
  if (!density) return 0.0;
  const double d = density(theta);
  if (!std::isfinite(d) || !(d > 0.0)) throw std::invalid_argument("prior: density must be finite and positive");
  return std::log(d);
}

std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::kQmle ? "M" : "B"; }

EstimatorKind estimator_kind_from_string(const std::string& text) {
  if (text == "M" || text == "qmle") return EstimatorKind::kQmle;
  if (text == "B" || text == "qbe") return EstimatorKind::kQbe;
  throw std::invalid_argument("unknown estimator kind '" + text + "'");
}

namespace {

void check_dims(const QuasiLikelihoodField& field, const ThetaBox& box) {
  box.validate();
  if (field.dim() != box.dim()) throw std::invalid_argument("estimator: field and box dimensions differ");
}

double finite_value(const QuasiLikelihoodField& field, const Vector& theta) {
  const double v = field.value(theta);
  if (!std::isfinite(v)) throw EstimationError("estimator: field is not finite on the box");
  return v;
}

// Maximizes the field along one coordinate inside [lo, hi] by golden section.
double golden_section(const QuasiLikelihoodField& field, Vector& theta, Eigen::Index axis, double lo, double hi,
                      double current) {
  constexpr double kInvPhi = 0.6180339887498949;
  Vector probe = theta;
  auto eval = [&](double x) {
    probe[axis] = x;
    return finite_value(field, probe);
  };
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = eval(x1), f2 = eval(x2);
  for (int it = 0; it < 80 && b - a > 1e-14 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = eval(x2);
    }
  }
  const double x = f1 >= f2 ? x1 : x2;
  const double f = std::max(f1, f2);
  if (f > current) {
    theta[axis] = x;
    return f;
  }
  return current;
}

}  // namespace

EstimateRecord qmle(const QuasiLikelihoodField& field, const ThetaBox& box, const QmleOptions& options) {
  check_dims(field, box);
  const ThetaGrid grid = ThetaGrid::over(box, options.grid_points);
  const auto p = static_cast<Eigen::Index>(box.dim());

  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = finite_value(field, grid.point(i));
    if (v > best_value) {
      best_value = v;
      best = i;
    }
    lowest = std::min(lowest, v);
  }

  EstimateRecord rec;
  rec.kind = EstimatorKind::kQmle;
  if (best_value == lowest) {
    rec.theta_hat = box.center();
    rec.value = finite_value(field, rec.theta_hat);
    rec.flat_flag = true;
    return rec;
  }

  Vector theta = grid.point(best);
  double value = best_value;
  std::size_t it = 0;
  for (; it < options.max_iterations; ++it) {
    const Vector g = field.gradient(theta);
    std::vector<Eigen::Index> free;
    double projected = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      const bool pinned = (theta[i] <= box.lower[i] && g[i] < 0.0) || (theta[i] >= box.upper[i] && g[i] > 0.0);
      if (!pinned) {
        free.push_back(i);
        projected = std::max(projected, std::abs(g[i]));
      }
    }
    if (projected <= options.gradient_tolerance * (1.0 + std::abs(value))) break;

    const auto nf = static_cast<Eigen::Index>(free.size());
    const Matrix hess = field.hessian(theta);
    Matrix neg(nf, nf);
    Vector gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = g[free[a]];
      for (Eigen::Index b = 0; b < nf; ++b) neg(a, b) = -hess(free[a], free[b]);
    }

    bool improved = false;
    Eigen::LLT<Matrix> llt(neg);
    if (llt.info() == Eigen::Success) {
      const Vector step = llt.solve(gf);
      double t = 1.0;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        Vector cand = theta;
        for (Eigen::Index a = 0; a < nf; ++a) cand[free[a]] += t * step[a];
        cand = box.clamp(cand);
        if (cand == theta) break;
        const double v = finite_value(field, cand);
        if (v >= value) {
          improved = v > value || (cand - theta).norm() > 0.0;
          theta = cand;
          value = v;
          break;
        }
      }
    }
    if (!improved) {
      const double before = value;
      for (Eigen::Index a : free) {
        const double w = grid.spacing(static_cast<std::size_t>(a));
        value = golden_section(field, theta, a, std::max(box.lower[a], theta[a] - w),
                               std::min(box.upper[a], theta[a] + w), value);
      }
      if (!(value > before)) break;
    }
  }

  if (value < best_value) {
    theta = grid.point(best);
    value = best_value;
  }
  rec.theta_hat = theta;
  rec.value = value;
  rec.iterations = it;
  rec.boundary_flag = !box.interior(theta);
  return rec;
}

namespace {

struct QuadratureState {
  ThetaGrid grid;
  std::vector<double> h;      // field values
  std::vector<double> prior;  // log prior
};

void fill_grid(const QuasiLikelihoodField& field, const Prior& prior, QuadratureState& state,
               const QuadratureState* coarse) {
  const std::size_t n = state.grid.size();
  state.h.assign(n, 0.0);
  state.prior.assign(n, 0.0);
  for (std::size_t f = 0; f < n; ++f) {
    bool reuse = coarse != nullptr;
    std::size_t coarse_flat = 0;
    if (coarse) {
      const auto idx = state.grid.unflatten(f);
      for (std::size_t a = 0; a < idx.size(); ++a) {
        if (idx[a] % 2 != 0) {
          reuse = false;
          break;
        }
        coarse_flat = coarse_flat * coarse->grid.points[a] + idx[a] / 2;
      }
    }
    if (reuse) {
      state.h[f] = coarse->h[coarse_flat];
      state.prior[f] = coarse->prior[coarse_flat];
    } else {
      const Vector th = state.grid.point(f);
      state.h[f] = finite_value(field, th);
      state.prior[f] = prior.log_density(th);
    }
  }
}

struct QuadratureResult {
  Vector mean;
  double log_integral;  // log int exp(H) over the box, no prior
};

QuadratureResult integrate(const QuadratureState& state) {
  const ThetaGrid& grid = state.grid;
  const std::size_t n = grid.size();
  const auto p = static_cast<Eigen::Index>(grid.dim());
  std::vector<double> logw(n);
  double log_cell = 0.0;
  for (std::size_t a = 0; a < grid.dim(); ++a) log_cell += std::log(grid.spacing(a));
  double top = -std::numeric_limits<double>::infinity(), top_h = top;
  for (std::size_t f = 0; f < n; ++f) {
    const auto idx = grid.unflatten(f);
    double lw = log_cell;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      if (idx[a] == 0 || idx[a] + 1 == grid.points[a]) lw += std::log(0.5);
    }
    logw[f] = lw;
    top = std::max(top, state.h[f] + state.prior[f] + lw);
    top_h = std::max(top_h, state.h[f] + lw);
  }
  double s0 = 0.0, m0 = 0.0;
  Vector s1 = Vector::Zero(p);
  for (std::size_t f = 0; f < n; ++f) {
    const double w = std::exp(state.h[f] + state.prior[f] + logw[f] - top);
    s0 += w;
    s1 += w * grid.point(f);
    m0 += std::exp(state.h[f] + logw[f] - top_h);
  }
  return {s1 / s0, top_h + std::log(m0)};
}

}  // namespace

EstimateRecord qbe(const QuasiLikelihoodField& field, const Prior& prior, const ThetaBox& box,
                   const QbeOptions& options) {
  check_dims(field, box);
  const std::size_t points = options.grid_points ? options.grid_points : default_grid_points(box.dim());
  QuadratureState state{ThetaGrid::over(box, points), {}, {}};
  fill_grid(field, prior, state, nullptr);
  QuadratureResult res = integrate(state);

  std::size_t refinements = 0;
  for (; refinements < options.max_refinements; ++refinements) {
    QuadratureState fine{state.grid, {}, {}};
    for (auto& k : fine.grid.points) k = 2 * k - 1;
    fill_grid(field, prior, fine, &state);
    const QuadratureResult next = integrate(fine);
    const double change = (next.mean - res.mean).lpNorm<Eigen::Infinity>();
    const double scale = res.mean.lpNorm<Eigen::Infinity>();
    state = std::move(fine);
    res = next;
    if (change <= options.relative_tolerance * scale) {
      ++refinements;
      break;
    }
  }

  EstimateRecord rec;
  rec.kind = EstimatorKind::kQbe;
  rec.theta_hat = res.mean.cwiseMax(box.lower).cwiseMin(box.upper);
  rec.value = res.log_integral;
  rec.iterations = refinements;
  return rec;
}

Vector standardize(const Vector& theta_hat, const Vector& theta_star, const Vector& rate) {
  if (theta_hat.size() != theta_star.size() || rate.size() != theta_star.size()) {
    throw std::invalid_argument("standardize: dimension mismatch");
  }
  if ((rate.array() == 0.0).any()) throw std::invalid_argument("standardize: a_T is singular");
  return (theta_hat - theta_star).cwiseQuotient(rate);
}

void localize(EstimateRecord& record, const FieldEval& eval) {
  const Vector& rate = eval.rate();
  record.u_hat = standardize(record.theta_hat, eval.theta_star(), rate);
  const Matrix hess = eval.field().hessian(eval.theta_star());
  record.gamma_T = -(rate.asDiagonal() * hess * rate.asDiagonal());
  record.gamma_T = 0.5 * (record.gamma_T + record.gamma_T.transpose());
  if (record.kind == EstimatorKind::kQbe) {
    record.mass_logZ = record.value - eval.value_at_theta_star() - rate.array().log().sum();
  }
}

Vector qmle_linear_oracle(const RegressionPaths& paths, const ErgodicModelSpec& model) {
  if (!model.is_linear()) throw std::invalid_argument("linear oracle: model is not linear in theta");
  const auto p = static_cast<Eigen::Index>(model.dim());
  const std::size_t n = paths.grid().n_steps();
  const double h = paths.grid().step();
  Vector rhs = Vector::Zero(p);
  Matrix B = Matrix::Zero(p, p);
  for (std::size_t j = 0; j < n; ++j) {
    const double l = paths.L.values[j];
    const double u = paths.U.values[j];
    const double sigma = model.sigma0(l) * model.sigma1(u);
    const double w = 1.0 / (sigma * sigma);
    const double b0 = model.b0(l);
    const Vector phi = model.linear_basis(u);
    const double offset = model.linear_offset ? model.linear_offset(u) : 0.0;
    const double dy = paths.Y.values[j + 1] - paths.Y.values[j];
    for (Eigen::Index k = 0; k < p; ++k) {
      rhs[k] += w * b0 * phi[k] * (dy - b0 * offset * h);
      for (Eigen::Index m = 0; m < p; ++m) B(k, m) += w * b0 * b0 * phi[k] * phi[m] * h;
    }
  }
  Eigen::FullPivLU<Matrix> lu(B);
  if (B.isZero(0.0) || lu.rank() < p) throw EstimationError("linear oracle: quadratic coefficient B is singular");
  return model.box.clamp(lu.solve(rhs));
}

EstimateRecord qmle_vol_oracle(const VolEnvPaths& paths, const VolEnvModelSpec& model) {
  if (!model.scale_form || model.dim() != 1) throw std::invalid_argument("volatility oracle: needs the scale-form model");
  if (!(model.box.lower[0] > 0.0)) throw std::invalid_argument("volatility oracle: lower box edge must be > 0");
  const std::size_t n = paths.grid().n_steps();
  double sum = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const double dy = paths.Y.values[j] - paths.Y.values[j - 1];
    const double x = paths.X.values[j - 1];
    sum += dy * dy / (1.0 + x * x);
  }
  EstimateRecord rec;
  rec.kind = EstimatorKind::kQmle;
  rec.theta_hat = Vector::Constant(1, model.box.lower[0]);
  if (sum == 0.0) {
    rec.boundary_flag = true;
    return rec;
  }
  rec.theta_hat[0] = std::sqrt(sum / paths.grid().horizon());
  rec.theta_hat = model.box.clamp(rec.theta_hat);
  rec.boundary_flag = !model.box.interior(rec.theta_hat);
  return rec;
}

namespace {

nlohmann::json vector_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

nlohmann::json to_json(const EstimateRecord& record) {
  nlohmann::json j;
  j["kind"] = to_string(record.kind);
  j["theta_hat"] = vector_json(record.theta_hat);
  j["u_hat"] = vector_json(record.u_hat);
  j["psi"] = record.psi;
  nlohmann::json gamma = nlohmann::json::array();
  for (Eigen::Index r = 0; r < record.gamma_T.rows(); ++r) gamma.push_back(vector_json(record.gamma_T.row(r)));
  j["gamma_T"] = gamma;
  j["mass_logZ"] = std::isfinite(record.mass_logZ) ? nlohmann::json(record.mass_logZ) : nlohmann::json(nullptr);
  j["boundary_flag"] = record.boundary_flag;
  j["flat_flag"] = record.flat_flag;
  j["iterations"] = record.iterations;
  j["value"] = record.value;
  return j;
}

EstimateRecord estimate_from_json(const nlohmann::json& j) {
  EstimateRecord rec;
  rec.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
  rec.theta_hat = vector_from_json(j.at("theta_hat"));
  rec.u_hat = vector_from_json(j.at("u_hat"));
  rec.psi = j.at("psi").get<int>();
  const auto& gamma = j.at("gamma_T");
  rec.gamma_T = Matrix(static_cast<Eigen::Index>(gamma.size()), static_cast<Eigen::Index>(gamma.size()));
  for (std::size_t r = 0; r < gamma.size(); ++r) {
    rec.gamma_T.row(static_cast<Eigen::Index>(r)) = vector_from_json(gamma[r]).transpose();
  }
  const auto& mass = j.at("mass_logZ");
  rec.mass_logZ = mass.is_null() ? std::numeric_limits<double>::quiet_NaN() : mass.get<double>();
  rec.boundary_flag = j.at("boundary_flag").get<bool>();
  rec.flat_flag = j.value("flat_flag", false);
  rec.iterations = j.at("iterations").get<std::size_t>();
  rec.value = j.value("value", 0.0);
  return rec;
}

}  // namespace pqla
