#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pqla/error.hpp"
#include "pqla/random_field.hpp"
#include "pqla/stats.hpp"

using namespace pqla;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

RegressionPaths small_paths(std::size_t p, std::uint64_t seed, double T = 20.0, std::size_t n = 2000) {
  return sim_regression(ErgodicModelSpec::reference(p), TimeGrid(T, n), seed, RegressionOptions{2});
}

// -T (theta - theta*)^2 / 2 with the matching derivatives.
FieldPtr quadratic_field(double T, double theta_star) {
  return std::make_shared<FunctionField>(
      1, [=](const Vector& th) { return -0.5 * T * (th[0] - theta_star) * (th[0] - theta_star); },
      [=](const Vector& th) { return Vector::Constant(1, -T * (th[0] - theta_star)); },
      [=](const Vector&) { return Matrix::Constant(1, 1, -T); });
}

}  // namespace

TEST(RegressionField, EmptyDriftGivesZeroField) {
  ErgodicModelSpec model = ErgodicModelSpec::reference(1);
  model.b1 = [](double, const Vector&) { return 0.0; };
  model.b1_grad = [](double, const Vector&) { return Vector::Zero(1); };
  model.linear_basis = {};
  const auto paths = small_paths(1, 1, 2.0, 100);
  for (double th : {-2.0, 0.0, 1.5}) EXPECT_EQ(h_continuous(paths, model, vec({th})), 0.0);
}

TEST(RegressionField, QuadraticFormMatchesDirectSum) {
  const auto model = ErgodicModelSpec::reference(1);
  const auto paths = small_paths(1, 3);
  // Independent oracle: A = sum (1 + L^2) tanh(U) dY, B = sum (1 + L^2)^2 tanh^2(U) h.
  double A = 0.0, B = 0.0;
  const double h = paths.grid().step();
  for (std::size_t j = 0; j + 1 < paths.Y.values.size(); ++j) {
    const double l = paths.L.at(j), t = std::tanh(paths.U.at(j));
    A += (1 + l * l) * t * (paths.Y.at(j + 1) - paths.Y.at(j));
    B += (1 + l * l) * (1 + l * l) * t * t * h;
  }
  const LinearRegressionField lin(paths, model);
  const RegressionField direct(paths, model);
  for (double th : {-2.0, -0.3, 0.0, 1.0, 1.7, 2.0}) {
    const double oracle = th * A - 0.5 * th * th * B;
    const double scale = std::abs(th * A) + 0.5 * th * th * B + 1e-300;
    EXPECT_NEAR(lin.value(vec({th})), oracle, 1e-12 * scale);
    EXPECT_NEAR(direct.value(vec({th})), oracle, 1e-12 * scale);
  }
  EXPECT_NEAR(lin.quadratic_term()(0, 0), B, 1e-12 * B);
}

TEST(RegressionField, TwoParameterLinearAgreesWithDirect) {
  const auto model = ErgodicModelSpec::reference(2);
  const auto paths = small_paths(2, 4);
  const LinearRegressionField lin(paths, model);
  const RegressionField direct(paths, model);
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const Vector th = vec({unif(eng), unif(eng)});
    const double v = direct.value(th);
    EXPECT_NEAR(lin.value(th), v, 1e-11 * (1 + std::abs(v)));
    EXPECT_LE((lin.gradient(th) - direct.gradient(th)).norm(), 1e-9 * (1 + direct.gradient(th).norm()));
    EXPECT_LE((lin.hessian(th) - direct.hessian(th)).norm(), 1e-9 * direct.hessian(th).norm());
  }
}

TEST(RegressionField, GradientMatchesFiniteDifferences) {
  const auto model = ErgodicModelSpec::reference(2);
  std::mt19937_64 eng(6);
  std::uniform_real_distribution<double> unif(-1.9, 1.9);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RegressionField f(small_paths(2, 100 + s, 10.0, 500), model);
    const Vector th = vec({unif(eng), unif(eng)});
    const Vector g = f.gradient(th);
    for (int k = 0; k < 2; ++k) {
      Vector e = Vector::Zero(2);
      e[k] = 1e-5;
      const double fd = (f.value(th + e) - f.value(th - e)) / 2e-5;
      EXPECT_NEAR(g[k], fd, 1e-6 * std::max(1.0, std::abs(g[k])));
    }
  }
}

TEST(RegressionField, ThirdDifferencesVanish) {
  const auto model = ErgodicModelSpec::reference(1);
  const RegressionField f(small_paths(1, 8), model);
  const double d = 0.1;
  auto v = [&](double t) { return f.value(vec({t})); };
  const double third = v(0.3 + 3 * d) - 3 * v(0.3 + 2 * d) + 3 * v(0.3 + d) - v(0.3);
  EXPECT_LE(std::abs(third), 1e-10 * std::abs(v(0.3)));
}

TEST(RegressionField, SingularDiffusionNamesIndex) {
  ErgodicModelSpec model = ErgodicModelSpec::reference(1);
  auto paths = small_paths(1, 2, 1.0, 10);
  model.sigma0 = [](double l) { return l > 1e8 ? 0.0 : 1.0; };
  paths.L.values[4] = 1e9;
  try {
    RegressionField f(paths, model);
    FAIL();
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("j = 4"), std::string::npos);
  }
}

TEST(VolatilityField, HandArithmetic) {
  // m = 1, S = theta^2 (X = 0 throughout), sum dY^2 = T: H_n(1) = -n/2.
  VolEnvModelSpec model = VolEnvModelSpec::remark(1.0);
  const std::size_t n = 8;
  const TimeGrid grid(2.0, n);
  VolEnvPaths p;
  p.env = SamplePath{grid, 1, std::vector<double>(n + 1, 0.0), 0, "B"};
  p.X = SamplePath{grid, 1, std::vector<double>(n + 1, 0.0), 0, "X"};
  std::vector<double> y(n + 1, 0.0);
  const double inc = std::sqrt(2.0 / n);
  for (std::size_t j = 1; j <= n; ++j) y[j] = y[j - 1] + (j % 2 ? inc : -inc);
  p.Y = SamplePath{grid, 1, y, 0, "Y"};
  EXPECT_NEAR(h_volatility(p, model, vec({1.0})), -0.5 * n, 1e-12);
  EXPECT_TRUE(std::isfinite(h_volatility(p, model, vec({0.5}))));
}

TEST(VolatilityField, GridArgmaxMatchesClosedForm) {
  const auto model = VolEnvModelSpec::remark(1.0);
  VolEnvModelSpec tame = model;
  tame.x_drift = [](double, double x) { return -x; };
  const auto p = sim_vol_env(tame, TimeGrid(1.0, 500), 3);
  const VolatilityField f(p, model);
  double sum = 0.0;
  for (std::size_t j = 1; j <= 500; ++j) {
    const double dy = p.Y.at(j) - p.Y.at(j - 1), x = p.X.at(j - 1);
    sum += dy * dy / (1 + x * x);
  }
  const double closed = std::sqrt(sum / 1.0);
  const ThetaGrid grid = ThetaGrid::over(model.box, 20001);
  double best = -INFINITY, arg = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = f.value(grid.point(i));
    if (v > best) best = v, arg = grid.point(i)[0];
  }
  EXPECT_NEAR(arg, closed, grid.spacing(0));
}

TEST(VolatilityField, DerivativesMatchFiniteDifferences) {
  VolEnvModelSpec model = VolEnvModelSpec::remark(1.0);
  VolEnvModelSpec tame = model;
  tame.x_drift = [](double, double x) { return -x; };
  const VolatilityField f(sim_vol_env(tame, TimeGrid(1.0, 200), 9), model);
  for (double th : {0.6, 1.0, 1.8}) {
    const double e = 1e-5;
    const double fd1 = (f.value(vec({th + e})) - f.value(vec({th - e}))) / (2 * e);
    const double fd2 = (f.gradient(vec({th + e}))[0] - f.gradient(vec({th - e}))[0]) / (2 * e);
    EXPECT_NEAR(f.gradient(vec({th}))[0], fd1, 1e-6 * std::max(1.0, std::abs(fd1)));
    EXPECT_NEAR(f.hessian(vec({th}))(0, 0), fd2, 1e-6 * std::max(1.0, std::abs(fd2)));
  }
}

TEST(ZField, IdentityAndDomain) {
  const auto model = ErgodicModelSpec::reference(1);
  const FieldEval eval(make_regression_field(small_paths(1, 3), model), model.box, model.theta_star,
                       Vector::Constant(1, 1.0 / std::sqrt(20.0)), 0);
  EXPECT_EQ(z_field(eval, vec({0.0})), 1.0);
  const double h1 = eval.field().value(vec({1.0 + 0.5 / std::sqrt(20.0)}));
  EXPECT_NEAR(log_z_field(eval, vec({0.5})), h1 - eval.value_at_theta_star(), 1e-12 * (1 + std::abs(h1)));
  EXPECT_THROW(log_z_field(eval, vec({10.0})), std::out_of_range);
  EXPECT_NO_THROW(log_z_field(eval, vec({std::sqrt(20.0)})));
  EXPECT_DOUBLE_EQ(eval.b_T(), 20.0);
}

TEST(ZField, QuadraticFieldIsStandardGaussian) {
  const double T = 400.0;
  const FieldEval eval(quadratic_field(T, 1.0), ThetaBox::cube(1, -2, 2), vec({1.0}),
                       Vector::Constant(1, 1 / std::sqrt(T)), 11);
  for (double u : {-3.0, -0.7, 0.0, 1.1, 5.0}) EXPECT_NEAR(eval.log_z(vec({u})), -0.5 * u * u, 1e-10);
  EXPECT_EQ(eval.values().size(), 11u);
  EXPECT_DOUBLE_EQ(eval.grid().point(10)[0], 2.0);
}

TEST(Laq, QuadraticFieldHasZeroRemainder) {
  const FieldEval eval(quadratic_field(50.0, 0.2), ThetaBox::cube(1, -2, 2), vec({0.2}),
                       Vector::Constant(1, 1 / std::sqrt(50.0)), 0);
  const auto d = laq_decompose(eval, Matrix::Constant(1, 1, 1.0));
  EXPECT_NEAR(d.gamma_T(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(d.delta[0], 0.0, 1e-12);
  for (double u : {-2.0, 0.5, 3.0}) EXPECT_NEAR(d.remainder(vec({u})), 0.0, 1e-10);
}

TEST(Laq, GammaMatchesAnalyticCurvature) {
  const auto model = ErgodicModelSpec::reference(1);
  const auto paths = small_paths(1, 12);
  const LinearRegressionField lin(paths, model);
  const double T = paths.grid().horizon();
  const FieldEval eval(make_regression_field(paths, model, false), model.box, model.theta_star,
                       Vector::Constant(1, 1 / std::sqrt(T)), 0);
  const auto d = laq_decompose(eval, Matrix::Identity(1, 1));
  const double analytic = lin.quadratic_term()(0, 0) / T;
  EXPECT_NEAR(d.gamma_T(0, 0), analytic, 1e-8 * analytic);
  // Second differences of H.
  const double e = 1e-3;
  auto v = [&](double t) { return eval.field().value(vec({t})); };
  const double sd = -(v(1 + e) - 2 * v(1) + v(1 - e)) / (e * e) / T;
  EXPECT_NEAR(sd, analytic, 1e-6 * analytic);
  const double fd = (v(1 + 1e-5) - v(1 - 1e-5)) / 2e-5 / std::sqrt(T);
  EXPECT_NEAR(d.delta[0], fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST(LimitField, GammaMatchesQuadrature) {
  const auto model = ErgodicModelSpec::reference(1);
  const ThetaGrid grid = ThetaGrid::over(model.box, 41);
  const LimitField lf = limit_field(model, grid, 200000, 1);
  const Quadrature q = gauss_hermite(80);
  double tanh2 = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) tanh2 += q.weights[i] * std::pow(std::tanh(q.nodes[i]), 2);
  const double oracle = 6.0 * tanh2;
  EXPECT_NEAR(lf.gamma(0, 0), oracle, 3.5 * lf.gamma_se(0, 0));
  // Y(theta*) = 0 and constant second differences.
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (std::abs(grid.point(g)[0] - 1.0) < 1e-12) EXPECT_EQ(lf.y[g], 0.0);
    EXPECT_LE(lf.y[g], 0.0);
  }
  const double d0 = lf.y[2] - 2 * lf.y[1] + lf.y[0];
  for (std::size_t g = 1; g + 1 < grid.size(); ++g) {
    EXPECT_NEAR(lf.y[g + 1] - 2 * lf.y[g] + lf.y[g - 1], d0, 1e-9 * std::abs(d0));
  }
  EXPECT_GT(lf.chi0, 0.0);
  EXPECT_THROW(limit_field(model, grid, 100, 1), std::invalid_argument);
}

TEST(Modulus, QuadraticEdgePair) {
  const FieldEval eval(quadratic_field(1.0, 0.0), ThetaBox::cube(1, -10, 10), vec({0.0}), Vector::Ones(1), 0);
  const double c = 3.0, delta = 0.5, spacing = 0.01;
  const double w = modulus_of_continuity(eval, delta, c, spacing);
  EXPECT_NEAR(w, c * delta - 0.5 * delta * delta, 2 * c * spacing);
  EXPECT_EQ(modulus_of_continuity(eval, 0.0, c, spacing), 0.0);
  EXPECT_LE(w, modulus_of_continuity(eval, 2 * delta, c, spacing));
  EXPECT_LE(modulus_of_continuity(eval, delta, 2.0, spacing), w);
  EXPECT_THROW(modulus_of_continuity(eval, 0.01, c, spacing), std::invalid_argument);
}

TEST(ThetaGrid, LexicographicOrder) {
  const ThetaGrid g = ThetaGrid::over(ThetaBox::cube(2, -1, 1), 3);
  EXPECT_EQ(g.size(), 9u);
  EXPECT_EQ(g.point(1), vec({-1.0, 0.0}));
  EXPECT_EQ(g.point(3), vec({0.0, -1.0}));
  EXPECT_EQ(g.point(8), vec({1.0, 1.0}));
  EXPECT_EQ(default_grid_points(1), 401u);
  EXPECT_EQ(default_grid_points(2), 101u);
}
