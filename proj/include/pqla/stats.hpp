#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pqla/models.hpp"

namespace pqla {

double normal_cdf(double x);
double normal_quantile(double p);

/// P[K > lambda] for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool pass = true;
};

/// One-sample KS test against `cdf` with the asymptotic p-value of sqrt(n) D.
/// Throws std::invalid_argument for fewer than 2 samples or zero spread.
KSResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf, double level = 0.01);
KSResult ks_normal(std::span<const double> samples, double level = 0.01);

double mean(std::span<const double> x);
/// Unbiased sample variance.
double variance(std::span<const double> x);
/// Linear-interpolation quantile (type 7) of a copy of x.
double quantile(std::span<const double> x, double q);
double median(std::span<const double> x);

/// Sample mean of f(x_i) with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};
Estimate mean_with_se(std::span<const double> x);

/// Ordinary least squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Nodes and weights with sum_i w_i f(x_i) ~ E f(Z), Z ~ N(0, 1) (Golub-Welsch).
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_hermite(std::size_t n);

/// Symmetric positive-definite square root.
Matrix sqrt_spd(const Matrix& m);

}  // namespace pqla
