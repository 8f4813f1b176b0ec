#include "pqla/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pqla {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal quantile: p must be in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KSResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf, double level) {
  if (samples.size() < 2) throw std::invalid_argument("KS test: need at least 2 samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw std::invalid_argument("KS test: degenerate sample (zero variance)");
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  KSResult r;
  r.statistic = d;
  r.n = x.size();
  r.p_value = kolmogorov_survival(std::sqrt(n) * d);
  r.pass = r.p_value >= level;
  return r;
}

KSResult ks_normal(std::span<const double> samples, double level) { return ks_test(samples, normal_cdf, level); }

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("variance: need at least 2 samples");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double quantile(std::span<const double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must be in [0, 1]");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

Estimate mean_with_se(std::span<const double> x) {
  Estimate e;
  e.value = mean(x);
  e.se = x.size() > 1 ? std::sqrt(variance(x) / static_cast<double>(x.size())) : 0.0;
  return e;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("line fit: need >= 2 paired points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("line fit: x values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

Quadrature gauss_hermite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  // Jacobi matrix of the probabilists' Hermite polynomials.
  const auto m = static_cast<Eigen::Index>(n);
  Matrix J = Matrix::Zero(m, m);
  for (Eigen::Index i = 1; i < m; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J);
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    q.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()[i];
    const double v = eig.eigenvectors()(0, i);
    q.weights[static_cast<std::size_t>(i)] = v * v;
  }
  return q;
}

Matrix sqrt_spd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if ((eig.eigenvalues().array() <= 0.0).any()) throw std::invalid_argument("sqrt_spd: matrix is not positive definite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace pqla
