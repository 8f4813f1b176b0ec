#include "pqla/random_field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "pqla/error.hpp"
#include "pqla/rng.hpp"

namespace pqla {

namespace {

void require_aligned(const RegressionPaths& paths) {
  const std::size_t n = paths.Y.values.size();
  if (paths.L.values.size() != n || paths.U.values.size() != n || !(paths.L.grid == paths.Y.grid) ||
      !(paths.U.grid == paths.Y.grid)) {
    throw std::invalid_argument("regression field: L, U, Y must share one grid");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// RegressionField
// ---------------------------------------------------------------------------

RegressionField::RegressionField(const RegressionPaths& paths, const ErgodicModelSpec& model)
    : model_(model), step_(paths.grid().step()) {
  require_aligned(paths);
  const std::size_t n = paths.grid().n_steps();
  u_.resize(n);
  b0_.resize(n);
  weight_.resize(n);
  dy_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double l = paths.L.values[j];
    const double u = paths.U.values[j];
    const double sd = model.diffusion(l, u);
    const double s = sd * sd;
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw EstimationError("regression field: S is singular at j = " + std::to_string(j));
    }
    u_[j] = u;
    b0_[j] = model.b0(l);
    weight_[j] = 1.0 / s;
    dy_[j] = paths.Y.values[j + 1] - paths.Y.values[j];
  }
}

double RegressionField::value(const Vector& theta) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < u_.size(); ++j) {
    const double b = b0_[j] * model_.b1(u_[j], theta);
    sum += weight_[j] * (b * dy_[j] - 0.5 * b * b * step_);
  }
  return sum;
}

Vector RegressionField::gradient(const Vector& theta) const {
  Vector g = Vector::Zero(theta.size());
  for (std::size_t j = 0; j < u_.size(); ++j) {
    const double b = b0_[j] * model_.b1(u_[j], theta);
    g += (weight_[j] * b0_[j] * (dy_[j] - b * step_)) * model_.b1_grad(u_[j], theta);
  }
  return g;
}

Matrix RegressionField::hessian(const Vector& theta) const {
  Matrix h = Matrix::Zero(theta.size(), theta.size());
  for (std::size_t j = 0; j < u_.size(); ++j) {
    const double b = b0_[j] * model_.b1(u_[j], theta);
    const Vector g = model_.b1_grad(u_[j], theta);
    h += (weight_[j] * b0_[j] * (dy_[j] - b * step_)) * model_.b1_hess(u_[j], theta);
    h -= (weight_[j] * b0_[j] * b0_[j] * step_) * (g * g.transpose());
  }
  return h;
}

// ---------------------------------------------------------------------------
// LinearRegressionField
// ---------------------------------------------------------------------------

LinearRegressionField::LinearRegressionField(const RegressionPaths& paths, const ErgodicModelSpec& model) {
  if (!model.is_linear()) throw std::invalid_argument("linear regression field: model is not linear in theta");
  require_aligned(paths);
  const auto p = static_cast<Eigen::Index>(model.dim());
  const double h = paths.grid().step();
  Vector A = Vector::Zero(p), c = Vector::Zero(p);
  quadratic_ = Matrix::Zero(p, p);
  for (std::size_t j = 0; j < paths.grid().n_steps(); ++j) {
    const double l = paths.L.values[j];
    const double u = paths.U.values[j];
    const double sd = model.diffusion(l, u);
    const double s = sd * sd;
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw EstimationError("regression field: S is singular at j = " + std::to_string(j));
    }
    const double w = 1.0 / s;
    const double b0 = model.b0(l);
    const Vector q = b0 * model.linear_basis(u);
    const double q0 = model.linear_offset ? b0 * model.linear_offset(u) : 0.0;
    const double dy = paths.Y.values[j + 1] - paths.Y.values[j];
    a0_ += w * q0 * dy;
    c0_ += w * q0 * q0 * h;
    A += (w * dy) * q;
    c += (w * q0 * h) * q;
    quadratic_ += (w * h) * (q * q.transpose());
  }
  linear_ = A - c;
}

double LinearRegressionField::value(const Vector& theta) const {
  return a0_ - 0.5 * c0_ + theta.dot(linear_) - 0.5 * theta.dot(quadratic_ * theta);
}

Vector LinearRegressionField::gradient(const Vector& theta) const { return linear_ - quadratic_ * theta; }

Matrix LinearRegressionField::hessian(const Vector&) const { return -quadratic_; }

// ---------------------------------------------------------------------------
// VolatilityField
// ---------------------------------------------------------------------------

VolatilityField::VolatilityField(const VolEnvPaths& paths, const VolEnvModelSpec& model)
    : model_(model), step_(paths.grid().step()) {
  const std::size_t n = paths.grid().n_steps();
  if (paths.X.values.size() != n + 1 || paths.env.values.size() != n + 1 || paths.Y.values.size() != n + 1) {
    throw std::invalid_argument("volatility field: env, X, Y must share one grid");
  }
  env_.assign(paths.env.values.begin(), paths.env.values.end() - 1);
  x_.assign(paths.X.values.begin(), paths.X.values.end() - 1);
  dy_.resize(n);
  for (std::size_t j = 0; j < n; ++j) dy_[j] = paths.Y.values[j + 1] - paths.Y.values[j];
}

double VolatilityField::checked_variance(std::size_t j, const Vector& theta) const {
  const double s = model_.variance(env_[j], x_[j], theta);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw EstimationError("volatility field: S is singular at j = " + std::to_string(j + 1));
  }
  return s;
}

double VolatilityField::value(const Vector& theta) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < dy_.size(); ++j) {
    const double s = checked_variance(j, theta);
    sum += std::log(s) + dy_[j] * dy_[j] / (step_ * s);
  }
  return -0.5 * sum;
}

Vector VolatilityField::gradient(const Vector& theta) const {
  Vector g = Vector::Zero(theta.size());
  for (std::size_t j = 0; j < dy_.size(); ++j) {
    const double s = checked_variance(j, theta);
    const double ratio = dy_[j] * dy_[j] / (step_ * s);
    g += ((1.0 - ratio) / s) * model_.variance_grad(env_[j], x_[j], theta);
  }
  return -0.5 * g;
}

Matrix VolatilityField::hessian(const Vector& theta) const {
  Matrix h = Matrix::Zero(theta.size(), theta.size());
  for (std::size_t j = 0; j < dy_.size(); ++j) {
    const double s = checked_variance(j, theta);
    const double ratio = dy_[j] * dy_[j] / (step_ * s);
    const Vector g = model_.variance_grad(env_[j], x_[j], theta) / s;
    const Matrix outer = g * g.transpose();
    h += (1.0 - ratio) * (model_.variance_hess(env_[j], x_[j], theta) / s - outer) + ratio * outer;
  }
  return -0.5 * h;
}

// ---------------------------------------------------------------------------
// FunctionField
// ---------------------------------------------------------------------------

FunctionField::FunctionField(std::size_t dim, std::function<double(const Vector&)> value,
                             std::function<Vector(const Vector&)> gradient, std::function<Matrix(const Vector&)> hessian)
    : dim_(dim), value_(std::move(value)), gradient_(std::move(gradient)), hessian_(std::move(hessian)) {
  if (!value_) throw std::invalid_argument("function field: value callable is required");
}

Vector FunctionField::gradient(const Vector& theta) const {
  if (gradient_) return gradient_(theta);
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double step = 1e-5 * std::max(1.0, std::abs(theta[i]));
    Vector up = theta, dn = theta;
    up[i] += step;
    dn[i] -= step;
    g[i] = (value_(up) - value_(dn)) / (2.0 * step);
  }
  return g;
}

Matrix FunctionField::hessian(const Vector& theta) const {
  if (hessian_) return hessian_(theta);
  const auto p = theta.size();
  Matrix h(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double step = 1e-4 * std::max(1.0, std::abs(theta[i]));
    Vector up = theta, dn = theta;
    up[i] += step;
    dn[i] -= step;
    h.col(i) = (gradient(up) - gradient(dn)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

FieldPtr make_regression_field(const RegressionPaths& paths, const ErgodicModelSpec& model, bool allow_linear) {
  if (allow_linear && model.is_linear()) return std::make_shared<LinearRegressionField>(paths, model);
  return std::make_shared<RegressionField>(paths, model);
}

FieldPtr make_volatility_field(const VolEnvPaths& paths, const VolEnvModelSpec& model) {
  return std::make_shared<VolatilityField>(paths, model);
}

double h_continuous(const RegressionPaths& paths, const ErgodicModelSpec& model, const Vector& theta) {
  return RegressionField(paths, model).value(theta);
}

double h_volatility(const VolEnvPaths& paths, const VolEnvModelSpec& model, const Vector& theta) {
  return VolatilityField(paths, model).value(theta);
}

// ---------------------------------------------------------------------------
// Grids and FieldEval
// ---------------------------------------------------------------------------

ThetaGrid ThetaGrid::over(const ThetaBox& box, std::size_t points_per_axis) {
  if (points_per_axis < 2) throw std::invalid_argument("theta grid: need at least 2 points per axis");
  return ThetaGrid{box.lower, box.upper, std::vector<std::size_t>(box.dim(), points_per_axis)};
}

std::size_t ThetaGrid::size() const {
  if (points.empty()) return 0;
  std::size_t n = 1;
  for (auto k : points) n *= k;
  return n;
}

double ThetaGrid::spacing(std::size_t axis) const {
  const auto a = static_cast<Eigen::Index>(axis);
  return (upper[a] - lower[a]) / static_cast<double>(points[axis] - 1);
}

double ThetaGrid::axis_value(std::size_t axis, std::size_t index) const {
  const auto a = static_cast<Eigen::Index>(axis);
  if (index + 1 == points[axis]) return upper[a];
  return lower[a] + spacing(axis) * static_cast<double>(index);
}

std::vector<std::size_t> ThetaGrid::unflatten(std::size_t flat) const {
  std::vector<std::size_t> idx(points.size());
  for (std::size_t a = points.size(); a-- > 0;) {
    idx[a] = flat % points[a];
    flat /= points[a];
  }
  return idx;
}

Vector ThetaGrid::point(std::size_t flat) const {
  const auto idx = unflatten(flat);
  Vector th(static_cast<Eigen::Index>(points.size()));
  for (std::size_t a = 0; a < points.size(); ++a) th[static_cast<Eigen::Index>(a)] = axis_value(a, idx[a]);
  return th;
}

std::size_t default_grid_points(std::size_t p) { return p == 1 ? 401 : 101; }

FieldEval::FieldEval(FieldPtr field, ThetaBox box, Vector theta_star, Vector rate, std::size_t points_per_axis)
    : field_(std::move(field)), box_(std::move(box)), theta_star_(std::move(theta_star)), rate_(std::move(rate)) {
  if (!field_) throw std::invalid_argument("field eval: null field");
  box_.validate();
  if (field_->dim() != box_.dim() || static_cast<std::size_t>(theta_star_.size()) != box_.dim() ||
      rate_.size() != theta_star_.size()) {
    throw std::invalid_argument("field eval: dimension mismatch");
  }
  if (!box_.contains(theta_star_)) throw std::invalid_argument("field eval: theta* outside the box");
  if (!(rate_.array() > 0.0).all()) throw std::invalid_argument("field eval: rate must be positive");
  h_star_ = field_->value(theta_star_);
  if (!std::isfinite(h_star_)) throw EstimationError("field eval: H(theta*) is not finite");
  if (points_per_axis > 0) {
    grid_ = ThetaGrid::over(box_, points_per_axis);
    values_.resize(grid_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
      values_[i] = field_->value(grid_.point(i));
      if (!std::isfinite(values_[i])) throw EstimationError("field eval: non-finite field value on the grid");
    }
  }
}

double FieldEval::b_T() const { return 1.0 / rate_.array().square().minCoeff(); }

ThetaBox FieldEval::local_box() const {
  return ThetaBox(u_of(box_.lower), u_of(box_.upper), box_.interior_margin);
}

bool FieldEval::in_local_domain(const Vector& u) const {
  const double tol = 1e-12 * (1.0 + box_.width().maxCoeff());
  return u.size() == theta_star_.size() && box_.contains(theta_of(u), tol);
}

double FieldEval::log_z(const Vector& u) const {
  if (!in_local_domain(u)) throw std::out_of_range("log Z: u is outside U_T");
  if (u.isZero(0.0)) return 0.0;
  return field_->value(box_.clamp(theta_of(u))) - h_star_;
}

double FieldEval::z(const Vector& u) const { return std::exp(log_z(u)); }

double z_field(const FieldEval& eval, const Vector& u) { return eval.z(u); }
double log_z_field(const FieldEval& eval, const Vector& u) { return eval.log_z(u); }

namespace {

struct IntegerGrid {
  std::vector<long> lo, hi;
  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t a = 0; a < lo.size(); ++a) n *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
    return lo.empty() ? 0 : n;
  }
  std::vector<long> index(std::size_t flat) const {
    std::vector<long> k(lo.size());
    for (std::size_t a = lo.size(); a-- > 0;) {
      const auto span = static_cast<std::size_t>(hi[a] - lo[a] + 1);
      k[a] = lo[a] + static_cast<long>(flat % span);
      flat /= span;
    }
    return k;
  }
};

IntegerGrid integer_grid(const FieldEval& eval, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("local grid: spacing must be > 0");
  const ThetaBox local = eval.local_box();
  IntegerGrid g;
  for (std::size_t a = 0; a < local.dim(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    const long lo = static_cast<long>(std::ceil(local.lower[i] / spacing - 1e-9));
    const long hi = static_cast<long>(std::floor(local.upper[i] / spacing + 1e-9));
    if (hi < lo) return IntegerGrid{};
    g.lo.push_back(lo);
    g.hi.push_back(hi);
  }
  return g;
}

Vector to_u(const std::vector<long>& k, double spacing) {
  Vector u(static_cast<Eigen::Index>(k.size()));
  for (std::size_t a = 0; a < k.size(); ++a) u[static_cast<Eigen::Index>(a)] = static_cast<double>(k[a]) * spacing;
  return u;
}

}  // namespace

std::vector<Vector> local_grid(const FieldEval& eval, double spacing, double radius) {
  const IntegerGrid g = integer_grid(eval, spacing);
  std::vector<Vector> out;
  const std::size_t n = g.size();
  for (std::size_t f = 0; f < n; ++f) {
    Vector u = to_u(g.index(f), spacing);
    if (u.norm() < radius && eval.in_local_domain(u)) out.push_back(std::move(u));
  }
  return out;
}

LAQDecomp laq_decompose(const FieldEval& eval, const Matrix& gamma_limit) {
  const auto p = eval.theta_star().size();
  if (gamma_limit.rows() != p || gamma_limit.cols() != p) throw std::invalid_argument("LAQ: gamma has wrong shape");
  LAQDecomp d;
  const Vector& rate = eval.rate();
  d.delta = rate.cwiseProduct(eval.field().gradient(eval.theta_star()));
  const Matrix hess = eval.field().hessian(eval.theta_star());
  d.gamma_T = -(rate.asDiagonal() * hess * rate.asDiagonal());
  d.gamma_T = 0.5 * (d.gamma_T + d.gamma_T.transpose());
  d.gamma = gamma_limit;
  d.remainder = [eval, delta = d.delta, gamma = gamma_limit](const Vector& u) {
    return eval.log_z(u) - delta.dot(u) + 0.5 * u.dot(gamma * u);
  };
  return d;
}

// ---------------------------------------------------------------------------
// Limit field
// ---------------------------------------------------------------------------

LimitField limit_field(const ErgodicModelSpec& model, const ThetaGrid& grid, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw std::invalid_argument("limit field: need at least 10^4 Monte Carlo draws");
  model.validate();
  Engine engine = make_engine(derive_seed(seed, Stream::kLimitField));
  std::normal_distribution<double> normal;
  const double l_sd = std::sqrt(model.slow.covariance(0.0));
  const double u_sd = std::sqrt(model.ou.stationary_variance());

  std::vector<double> u(n_mc), b0sq_over_s(n_mc), b1_star(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double l = l_sd * normal(engine);
    u[i] = u_sd * normal(engine);
    const double b0 = model.b0(l);
    const double sd = model.diffusion(l, u[i]);
    b0sq_over_s[i] = b0 * b0 / (sd * sd);
    b1_star[i] = model.b1(u[i], model.theta_star);
  }
  const double n = static_cast<double>(n_mc);

  LimitField out;
  out.grid = grid;
  out.n_mc = n_mc;
  out.y.resize(grid.size());
  out.y_se.resize(grid.size());
  out.chi0 = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Vector th = grid.point(g);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
      const double diff = model.b1(u[i], th) - b1_star[i];
      const double d = b0sq_over_s[i] * diff * diff;
      sum += d;
      sum_sq += d * d;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    out.y[g] = -0.5 * mean;
    out.y_se[g] = 0.5 * std::sqrt(var / n);
    const double dist2 = (th - model.theta_star).squaredNorm();
    if (dist2 > 1e-24) out.chi0 = std::min(out.chi0, -out.y[g] / dist2);
  }

  const auto p = static_cast<Eigen::Index>(model.dim());
  Matrix sum = Matrix::Zero(p, p), sum_sq = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Vector g = model.b1_grad(u[i], model.theta_star);
    const Matrix term = b0sq_over_s[i] * (g * g.transpose());
    sum += term;
    sum_sq += term.cwiseProduct(term);
  }
  out.gamma = sum / n;
  out.gamma_se = ((sum_sq / n - out.gamma.cwiseProduct(out.gamma)).cwiseMax(0.0) / n).cwiseSqrt();
  return out;
}

// ---------------------------------------------------------------------------
// Modulus of continuity
// ---------------------------------------------------------------------------

double modulus_of_continuity(const FieldEval& eval, double delta, double c, double spacing) {
  if (delta < 0.0 || c <= 0.0) throw std::invalid_argument("modulus: need delta >= 0 and c > 0");
  if (delta == 0.0) return 0.0;
  if (spacing > 0.5 * delta * (1.0 + 1e-12)) {
    throw std::invalid_argument("modulus: grid spacing " + std::to_string(spacing) + " is coarser than delta / 2");
  }
  const IntegerGrid g = integer_grid(eval, spacing);
  const std::size_t dim = g.lo.size();
  // Encode multi-indices into one key using the grid extents.
  auto key = [&](const std::vector<long>& k) {
    long long kk = 0;
    for (std::size_t a = 0; a < dim; ++a) kk = kk * (g.hi[a] - g.lo[a] + 1) + (k[a] - g.lo[a]);
    return kk;
  };
  std::unordered_map<long long, double> values;
  std::vector<std::vector<long>> members;
  const std::size_t n = g.size();
  for (std::size_t f = 0; f < n; ++f) {
    const auto k = g.index(f);
    const Vector u = to_u(k, spacing);
    if (u.norm() < c && eval.in_local_domain(u)) {
      values.emplace(key(k), eval.log_z(u));
      members.push_back(k);
    }
  }
  const long reach = static_cast<long>(std::floor(delta / spacing + 1e-9));
  std::vector<std::vector<long>> offsets;
  {
    std::vector<long> off(dim, -reach);
    while (true) {
      double norm2 = 0.0;
      for (long o : off) norm2 += static_cast<double>(o * o);
      if (std::sqrt(norm2) * spacing <= delta * (1.0 + 1e-12)) offsets.push_back(off);
      std::size_t a = 0;
      while (a < dim && ++off[a] > reach) off[a++] = -reach;
      if (a == dim) break;
    }
  }
  double best = 0.0;
  for (const auto& k : members) {
    const double v = values.at(key(k));
    for (const auto& off : offsets) {
      std::vector<long> other(dim);
      bool inside = true;
      for (std::size_t a = 0; a < dim; ++a) {
        other[a] = k[a] + off[a];
        if (other[a] < g.lo[a] || other[a] > g.hi[a]) inside = false;
      }
      if (!inside) continue;
      const auto it = values.find(key(other));
      if (it != values.end()) best = std::max(best, std::abs(it->second - v));
    }
  }
  return best;
}

}  // namespace pqla
