#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "pqla/models.hpp"
#include "pqla/process_sim.hpp"

namespace pqla {

/// A quasi-log-likelihood random field theta -> H(theta) for one data set,
/// with analytic first and second theta-derivatives.  Implementations are
/// immutable after construction.
class QuasiLikelihoodField {
 public:
  virtual ~QuasiLikelihoodField() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;
  virtual Matrix hessian(const Vector& theta) const = 0;
};

using FieldPtr = std::shared_ptr<const QuasiLikelihoodField>;

/// Ito-sum discretization of the continuous-observation field
///   H(theta) = sum_j S_j^{-1} b_j(theta) dY_j - 1/2 sum_j S_j^{-1} b_j(theta)^2 h
/// with left-endpoint coefficients S_j = (sigma0 sigma1)^2, b_j = b0 b1 at t_j.
class RegressionField final : public QuasiLikelihoodField {
 public:
  /// Throws EstimationError naming j if S_j is zero or non-finite.
  RegressionField(const RegressionPaths& paths, const ErgodicModelSpec& model);

  std::size_t dim() const override { return model_.dim(); }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  Matrix hessian(const Vector& theta) const override;

 private:
  ErgodicModelSpec model_;
  double step_;
  std::vector<double> u_, b0_, weight_, dy_;
};

/// The same field for models with b1 linear in theta, stored as the exact
/// quadratic form H(theta) = a0 + theta.A - (c0 + 2 theta.c + theta' B theta) / 2.
class LinearRegressionField final : public QuasiLikelihoodField {
 public:
  LinearRegressionField(const RegressionPaths& paths, const ErgodicModelSpec& model);

  std::size_t dim() const override { return static_cast<std::size_t>(linear_.size()); }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  Matrix hessian(const Vector& theta) const override;

  const Vector& linear_term() const { return linear_; }
  const Matrix& quadratic_term() const { return quadratic_; }

 private:
  double a0_ = 0.0;
  double c0_ = 0.0;
  Vector linear_;  // A - c
  Matrix quadratic_;
};

/// Discrete-observation volatility field
///   H_n(theta) = -1/2 sum_j { log S(env, X_{j-1}, theta) + h^{-1} S^{-1} (dY_j)^2 }.
class VolatilityField final : public QuasiLikelihoodField {
 public:
  VolatilityField(const VolEnvPaths& paths, const VolEnvModelSpec& model);

  std::size_t dim() const override { return model_.dim(); }
  /// Throws EstimationError naming j when S(env, X_{j-1}, theta) <= 0.
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  Matrix hessian(const Vector& theta) const override;

 private:
  double checked_variance(std::size_t j, const Vector& theta) const;

  VolEnvModelSpec model_;
  double step_;
  std::vector<double> env_, x_, dy_;
};

/// Field given by callables; missing derivatives fall back to central
/// differences with step 1e-5 * max(1, |theta_i|).
class FunctionField final : public QuasiLikelihoodField {
 public:
  FunctionField(std::size_t dim, std::function<double(const Vector&)> value,
                std::function<Vector(const Vector&)> gradient = {},
                std::function<Matrix(const Vector&)> hessian = {});

  std::size_t dim() const override { return dim_; }
  double value(const Vector& theta) const override { return value_(theta); }
  Vector gradient(const Vector& theta) const override;
  Matrix hessian(const Vector& theta) const override;

 private:
  std::size_t dim_;
  std::function<double(const Vector&)> value_;
  std::function<Vector(const Vector&)> gradient_;
  std::function<Matrix(const Vector&)> hessian_;
};

/// Returns the quadratic-form field when the model is linear in theta and
/// `allow_linear` is set, otherwise the direct Ito sum.
FieldPtr make_regression_field(const RegressionPaths& paths, const ErgodicModelSpec& model, bool allow_linear = true);
FieldPtr make_volatility_field(const VolEnvPaths& paths, const VolEnvModelSpec& model);

double h_continuous(const RegressionPaths& paths, const ErgodicModelSpec& model, const Vector& theta);
double h_volatility(const VolEnvPaths& paths, const VolEnvModelSpec& model, const Vector& theta);

/// Tensor grid with lexicographic flat indexing (first coordinate slowest).
struct ThetaGrid {
  Vector lower;
  Vector upper;
  std::vector<std::size_t> points;

  static ThetaGrid over(const ThetaBox& box, std::size_t points_per_axis);

  std::size_t dim() const { return points.size(); }
  std::size_t size() const;
  double spacing(std::size_t axis) const;
  double axis_value(std::size_t axis, std::size_t index) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;
  Vector point(std::size_t flat) const;
};

/// Default theta-grid density: 401 points for p = 1, 101 per axis otherwise.
std::size_t default_grid_points(std::size_t p);

/// A field evaluated on a theta-grid together with the localisation data
/// (theta*, diagonal rate a_T).  Immutable; safe to share between threads.
class FieldEval {
 public:
  FieldEval(FieldPtr field, ThetaBox box, Vector theta_star, Vector rate, std::size_t points_per_axis);

  const QuasiLikelihoodField& field() const { return *field_; }
  const FieldPtr& field_ptr() const { return field_; }
  const ThetaBox& box() const { return box_; }
  const Vector& theta_star() const { return theta_star_; }
  const Vector& rate() const { return rate_; }
  const ThetaGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double value_at_theta_star() const { return h_star_; }
  /// (lambda_min(a_T' a_T))^{-1}
  double b_T() const;

  Vector theta_of(const Vector& u) const { return theta_star_ + rate_.cwiseProduct(u); }
  Vector u_of(const Vector& theta) const { return (theta - theta_star_).cwiseQuotient(rate_); }
  /// The local parameter box U_T = a_T^{-1}(Theta - theta*).
  ThetaBox local_box() const;
  bool in_local_domain(const Vector& u) const;

  /// log Z_T(u) = H(theta* + a_T u) - H(theta*); throws std::out_of_range
  /// ("outside U_T") when theta* + a_T u leaves the closed box.
  double log_z(const Vector& u) const;
  double z(const Vector& u) const;

 private:
  FieldPtr field_;
  ThetaBox box_;
  Vector theta_star_;
  Vector rate_;
  ThetaGrid grid_;
  std::vector<double> values_;
  double h_star_ = 0.0;
};

/// Z_T(u); exactly 1 at u = 0.
double z_field(const FieldEval& eval, const Vector& u);
double log_z_field(const FieldEval& eval, const Vector& u);

/// Points k * spacing (k integer, so u = 0 is included) of the local domain
/// U_T, optionally restricted to |u| < radius.
std::vector<Vector> local_grid(const FieldEval& eval, double spacing,
                               double radius = std::numeric_limits<double>::infinity());

struct LAQDecomp {
  Vector delta;    // a_T grad H(theta*)
  Matrix gamma_T;  // -a_T hess H(theta*) a_T
  Matrix gamma;    // information used in the remainder
  /// r_T(u) = log Z_T(u) - delta.u + u' gamma u / 2
  std::function<double(const Vector&)> remainder;
};

LAQDecomp laq_decompose(const FieldEval& eval, const Matrix& gamma_limit);

/// Monte Carlo limit field over the stationary law of (L_0, U_0).
struct LimitField {
  ThetaGrid grid;
  std::vector<double> y;
  std::vector<double> y_se;
  Matrix gamma;
  Matrix gamma_se;
  double chi0 = 0.0;
  std::size_t n_mc = 0;
};

/// Throws std::invalid_argument if n_mc < 10^4.
LimitField limit_field(const ErgodicModelSpec& model, const ThetaGrid& grid, std::size_t n_mc, std::uint64_t seed);

/// sup |log Z(u2) - log Z(u1)| over local-grid pairs with |u|, |u'| < c and
/// |u2 - u1| <= delta.  Throws std::invalid_argument if the grid spacing
/// exceeds delta / 2 (for delta > 0).
double modulus_of_continuity(const FieldEval& eval, double delta, double c, double spacing);

}  // namespace pqla
