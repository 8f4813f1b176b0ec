#include "pqla/models.hpp"

#include <cmath>
#include <stdexcept>

namespace pqla {

ThetaBox::ThetaBox(Vector lo, Vector hi, double margin)
    : lower(std::move(lo)), upper(std::move(hi)), interior_margin(margin) {
  validate();
}

ThetaBox ThetaBox::cube(std::size_t p, double lo, double hi) {
  const auto n = static_cast<Eigen::Index>(p);
  return ThetaBox(Vector::Constant(n, lo), Vector::Constant(n, hi));
}

void ThetaBox::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw std::invalid_argument("theta box: lower/upper must be non-empty and of equal length");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw std::invalid_argument("theta box: need finite lower < upper in every coordinate");
    }
  }
  if (!(interior_margin > 0.0)) throw std::invalid_argument("theta box: interior margin must be > 0");
}

bool ThetaBox::contains(const Vector& theta, double tol) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] < lower[i] - tol || theta[i] > upper[i] + tol) return false;
  }
  return true;
}

bool ThetaBox::interior(const Vector& theta) const {
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] < lower[i] + interior_margin || theta[i] > upper[i] - interior_margin) return false;
  }
  return true;
}

Vector ThetaBox::clamp(const Vector& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

double ThetaBox::volume() const { return (upper - lower).prod(); }

void OUSpec::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("OU: kappa must be > 0");
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("OU: s must be > 0");
}

void SlowMixSpec::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("slow-mixing spec: a must be > 0");
}

double SlowMixSpec::covariance(double lag) const { return std::pow(1.0 + std::abs(lag), -a); }

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void ErgodicModelSpec::validate() const {
  require(b0 && sigma0 && sigma1 && b1 && b1_grad && b1_hess,
          "regression model '" + name + "': coefficient functions are missing");
  require(theta_star.size() > 0, "regression model: theta* is empty");
  box.validate();
  require(box.dim() == dim(), "regression model: box dimension differs from theta*");
  require(box.contains(theta_star), "regression model: theta* lies outside the box");
  ou.validate();
  slow.validate();
  for (int i = -16; i <= 16; ++i) {
    for (int j = -16; j <= 16; ++j) {
      const double v = diffusion(0.5 * i, 0.5 * j);
      require(std::isfinite(v) && std::abs(v) > 0.0,
              "regression model '" + name + "': sigma0 * sigma1 vanishes (S singular)");
    }
  }
}

ErgodicModelSpec ErgodicModelSpec::reference(std::size_t p) {
  if (p != 1 && p != 2) throw std::invalid_argument("reference regression model: p must be 1 or 2");
  ErgodicModelSpec m;
  m.name = p == 1 ? "regression_p1" : "regression_p2";
  m.b0 = [](double l) { return 1.0 + l * l; };
  m.sigma0 = [](double) { return 1.0; };
  m.sigma1 = [](double) { return 1.0; };
  m.box = ThetaBox::cube(p, -2.0, 2.0);
  if (p == 1) {
    m.theta_star = Vector::Constant(1, 1.0);
    m.b1 = [](double u, const Vector& th) { return th[0] * std::tanh(u); };
    m.b1_grad = [](double u, const Vector&) { return Vector::Constant(1, std::tanh(u)); };
    m.b1_hess = [](double, const Vector&) { return Matrix::Zero(1, 1); };
    m.linear_basis = [](double u) { return Vector::Constant(1, std::tanh(u)); };
  } else {
    m.theta_star = Vector(2);
    m.theta_star << 1.0, 0.5;
    m.b1 = [](double u, const Vector& th) { return th[0] * std::tanh(u) + th[1]; };
    m.b1_grad = [](double u, const Vector&) {
      Vector g(2);
      g << std::tanh(u), 1.0;
      return g;
    };
    m.b1_hess = [](double, const Vector&) { return Matrix::Zero(2, 2); };
    m.linear_basis = [](double u) {
      Vector g(2);
      g << std::tanh(u), 1.0;
      return g;
    };
  }
  m.linear_offset = [](double) { return 0.0; };

  // With q = (1 + l^2) * sum_k |phi_k(u)| and B = sup |theta|, the integrands
  // (b, b b* - b^2 / 2) and their theta-derivatives are bounded by
  // (B + 1) q and (B B* + B^2 / 2 + B* + B + 1) q^2.
  const double big = m.box.lower.cwiseAbs().cwiseMax(m.box.upper.cwiseAbs()).maxCoeff();
  const double star = m.theta_star.cwiseAbs().maxCoeff();
  const double c1 = big + 1.0;
  const double c2 = big * star + 0.5 * big * big + star + big + 1.0;
  const bool has_intercept = p == 2;
  m.envelope = [c1, c2, has_intercept](double l, double u) {
    const double q = (1.0 + l * l) * (std::abs(std::tanh(u)) + (has_intercept ? 1.0 : 0.0));
    return c1 * q + c2 * q * q;
  };
  return m;
}

void VolEnvModelSpec::validate() const {
  require(x_drift && variance && variance_grad && variance_hess,
          "volatility model '" + name + "': coefficient functions are missing");
  require(theta_star.size() > 0, "volatility model: theta* is empty");
  box.validate();
  require(box.dim() == dim(), "volatility model: box dimension differs from theta*");
  require(box.contains(theta_star), "volatility model: theta* lies outside the box");
  require(explosion_guard > 0.0, "volatility model: explosion guard must be > 0");
  // det S must stay away from 0 on the closed box; probe corners and centre.
  const std::size_t p = dim();
  for (std::size_t mask = 0; mask < (std::size_t{1} << p) + 1; ++mask) {
    Vector th = box.center();
    if (mask < (std::size_t{1} << p)) {
      for (std::size_t i = 0; i < p; ++i) {
        th[static_cast<Eigen::Index>(i)] = (mask >> i) & 1U ? box.upper[static_cast<Eigen::Index>(i)]
                                                              : box.lower[static_cast<Eigen::Index>(i)];
      }
    }
    for (int i = -10; i <= 10; ++i) {
      const double s = variance(0.0, 0.5 * i, th);
      require(std::isfinite(s) && s > 0.0,
              "volatility model '" + name + "': S is singular on the closed parameter box");
    }
  }
}

VolEnvModelSpec VolEnvModelSpec::remark(double theta_star) {
  VolEnvModelSpec m;
  m.name = "volatility_remark";
  m.x_drift = [](double b, double x) {
    const double b2 = b * b;
    return std::exp(b2 * b2) * x;
  };
  m.variance = [](double, double x, const Vector& th) { return th[0] * th[0] * (1.0 + x * x); };
  m.variance_grad = [](double, double x, const Vector& th) {
    return Vector::Constant(1, 2.0 * th[0] * (1.0 + x * x));
  };
  m.variance_hess = [](double, double x, const Vector&) { return Matrix::Constant(1, 1, 2.0 * (1.0 + x * x)); };
  if (!(theta_star > 0.0)) throw std::invalid_argument("remark volatility model: theta* must be > 0");
  m.theta_star = Vector::Constant(1, theta_star);
  m.box = ThetaBox::cube(1, 0.5 * theta_star, 2.0 * theta_star);
  m.scale_form = true;
  return m;
}

}  // namespace pqla
