#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>

namespace pqla {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned parameter box.  `interior_margin` is the distance from the
/// faces below which a point no longer counts as interior.
struct ThetaBox {
  Vector lower;
  Vector upper;
  double interior_margin = 1e-6;

  ThetaBox() = default;
  ThetaBox(Vector lo, Vector hi, double margin = 1e-6);
  static ThetaBox cube(std::size_t p, double lo, double hi);

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Vector& theta, double tol = 0.0) const;
  bool interior(const Vector& theta) const;
  Vector clamp(const Vector& theta) const;
  Vector center() const { return 0.5 * (lower + upper); }
  Vector width() const { return upper - lower; }
  double volume() const;
  void validate() const;
};

/// Ornstein-Uhlenbeck dU = -kappa U dt + s dW.
struct OUSpec {
  double kappa = 1.0;
  double s = 1.4142135623730951;

  void validate() const;
  double stationary_variance() const { return s * s / (2.0 * kappa); }
};

/// Stationary Gaussian process with covariance c(h) = (1 + |h|)^(-a).
struct SlowMixSpec {
  double a = 0.5;

  void validate() const;
  double covariance(double lag) const;
};

/// Ergodic stochastic regression
///   dY = b0(L) b1(U, theta) dt + sigma0(L) sigma1(U) dw
/// with a slow-mixing environment L and a fast-mixing factor U.
struct ErgodicModelSpec {
  std::string name = "regression";

  std::function<double(double)> b0;
  std::function<double(double)> sigma0;
  std::function<double(double)> sigma1;
  std::function<double(double, const Vector&)> b1;
  std::function<Vector(double, const Vector&)> b1_grad;
  std::function<Matrix(double, const Vector&)> b1_hess;

  // Set when b1(u, theta) = linear_offset(u) + linear_basis(u) . theta.
  std::function<Vector(double)> linear_basis;
  std::function<double(double)> linear_offset;

  /// Dominating envelope H1(l, u) of the theta-derivatives (orders 0..4) of
  /// the likelihood integrands, uniformly over the box.
  std::function<double(double, double)> envelope;

  Vector theta_star;
  ThetaBox box;
  OUSpec ou;
  SlowMixSpec slow;

  std::size_t dim() const { return static_cast<std::size_t>(theta_star.size()); }
  bool is_linear() const { return static_cast<bool>(linear_basis); }
  double drift(double l, double u, const Vector& theta) const { return b0(l) * b1(u, theta); }
  double diffusion(double l, double u) const { return sigma0(l) * sigma1(u); }

  /// Throws std::invalid_argument when a component is missing, theta_star is
  /// outside the box, or sigma0 * sigma1 vanishes on the probe grid.
  void validate() const;

  /// b0 = 1 + l^2, sigma0 = sigma1 = 1, box [-2, 2]^p.
  /// p = 1: b1 = theta tanh(u), theta* = 1.
  /// p = 2: b1 = theta_1 tanh(u) + theta_2, theta* = (1, 0.5).
  static ErgodicModelSpec reference(std::size_t p = 1);
};

/// Volatility regression in a random environment (gamma, B):
///   dX = x_drift(B_t, X) dt + d w~,    dY = y_drift dt + sigma(B_t, X, theta*) dw,
/// with S = sigma^2 (m = 1).
struct VolEnvModelSpec {
  std::string name = "volatility";

  std::function<double(double, double)> x_drift;
  std::function<double(double, double, const Vector&)> variance;
  std::function<Vector(double, double, const Vector&)> variance_grad;
  std::function<Matrix(double, double, const Vector&)> variance_hess;
  std::function<double(double, double, double)> y_drift;  // (t, env, x), may be empty (= 0)

  Vector theta_star;
  ThetaBox box;
  double x0 = 0.0;
  double explosion_guard = 1e6;
  /// sigma = theta sqrt(1 + x^2): enables the closed-form QMLE.
  bool scale_form = false;

  std::size_t dim() const { return static_cast<std::size_t>(theta_star.size()); }
  void validate() const;

  /// dX = exp(B^4) X dt + dw~, sigma = theta sqrt(1 + x^2), box [theta*/2, 2 theta*].
  static VolEnvModelSpec remark(double theta_star = 1.0);
};

}  // namespace pqla
