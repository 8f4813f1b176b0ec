#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pqla/error.hpp"
#include "pqla/process_sim.hpp"
#include "pqla/stats.hpp"

using namespace pqla;

namespace {

// |x - target| <= k standard errors of the sample mean of `draws`.
void expect_mean_near(const std::vector<double>& draws, double target, double k = 3.5) {
  const Estimate e = mean_with_se(draws);
  EXPECT_NEAR(e.value, target, k * e.se) << "se " << e.se;
}

}  // namespace

TEST(Wiener, IncrementVarianceAndSum) {
  const TimeGrid grid(1.0, 4);
  std::vector<double> sq, total;
  for (std::uint64_t s = 0; s < 20000; ++s) {
    const auto w = gen_wiener(grid, 1, s);
    ASSERT_EQ(w.dw.size(), 4u);
    double sum = 0.0;
    for (double d : w.dw) {
      sq.push_back(d * d);
      sum += d;
    }
    total.push_back(sum * sum);
  }
  expect_mean_near(sq, 0.25);
  expect_mean_near(total, 1.0);
}

TEST(Wiener, Deterministic) {
  const TimeGrid grid(1.0, 50);
  EXPECT_EQ(gen_wiener(grid, 2, 9).dw, gen_wiener(grid, 2, 9).dw);
  EXPECT_NE(gen_wiener(grid, 2, 9).dw, gen_wiener(grid, 2, 10).dw);
  EXPECT_THROW(gen_wiener(grid, 0, 1), std::invalid_argument);
}

TEST(OU, NoiselessLimitIsExponentialDecay) {
  const TimeGrid grid(2.0, 20);
  const auto p = sim_ou(OUSpec{1.5, 1e-300}, grid, 3, 2.0);
  for (std::size_t k = 0; k < grid.n_points(); ++k) {
    EXPECT_NEAR(p.at(k), 2.0 * std::exp(-1.5 * grid.time(k)), 1e-12);
  }
}

TEST(OU, StationaryCovarianceAtLag) {
  const OUSpec spec{1.0, std::sqrt(2.0)};
  const TimeGrid grid(1.0, 2);  // h = 0.5
  std::vector<double> v0, vT, cov;
  for (std::uint64_t s = 0; s < 40000; ++s) {
    const auto p = sim_ou(spec, grid, s);
    v0.push_back(p.at(0) * p.at(0));
    vT.push_back(p.at(2) * p.at(2));
    cov.push_back(p.at(0) * p.at(1));
  }
  expect_mean_near(v0, 1.0);
  expect_mean_near(vT, 1.0);
  expect_mean_near(cov, std::exp(-0.5));
}

TEST(OU, ConditionalTransitionMoments) {
  const OUSpec spec{2.0, 0.7};
  const TimeGrid grid(0.3, 2);
  const double h = 0.15, x = 1.3;
  const double m = std::exp(-spec.kappa * h) * x;
  const double v = spec.s * spec.s * (1.0 - std::exp(-2.0 * spec.kappa * h)) / (2.0 * spec.kappa);
  std::vector<double> d, d2;
  for (std::uint64_t s = 0; s < 40000; ++s) {
    const auto p = sim_ou(spec, grid, s, x);
    d.push_back(p.at(1) - m);
    d2.push_back((p.at(1) - m) * (p.at(1) - m));
  }
  expect_mean_near(d, 0.0);
  expect_mean_near(d2, v);
}

TEST(OU, RejectsInvalidSpec) {
  const TimeGrid grid(1.0, 10);
  EXPECT_THROW(sim_ou(OUSpec{0.0, 1.0}, grid, 1), std::invalid_argument);
  EXPECT_THROW(sim_ou(OUSpec{1.0, -1.0}, grid, 1), std::invalid_argument);
}

TEST(SlowGaussian, ImpliedCovarianceMatchesTarget) {
  const SlowMixSpec spec{0.5};
  const TimeGrid grid(50.0, 500);
  CirculantEmbedding emb(spec, grid);
  const auto c = emb.implied_covariance();
  ASSERT_EQ(c.size(), grid.n_points());
  for (std::size_t k = 0; k < c.size(); ++k) {
    EXPECT_NEAR(c[k], spec.covariance(grid.step() * k), 1e-8) << k;
  }
  EXPECT_LE(emb.clipped_mass(), 1e-8);
}

TEST(SlowGaussian, EmpiricalLagOneCovariance) {
  const SlowMixSpec spec{0.5};
  const TimeGrid grid(4.0, 4);
  CirculantEmbedding emb(spec, grid);
  std::vector<double> v0, c1, cross;
  Engine e1 = make_engine(11), e2 = make_engine(12);
  for (int i = 0; i < 40000; ++i) {
    const auto p = emb.sample(e1);
    const auto q = emb.sample(e2);
    v0.push_back(p[0] * p[0]);
    c1.push_back(p[0] * p[1]);
    cross.push_back(p[2] * q[2]);
  }
  expect_mean_near(v0, 1.0);
  expect_mean_near(c1, std::pow(2.0, -0.5));
  expect_mean_near(cross, 0.0);
}

TEST(SlowGaussian, CovarianceShape) {
  const SlowMixSpec spec{0.5};
  EXPECT_DOUBLE_EQ(spec.covariance(0.0), 1.0);
  EXPECT_DOUBLE_EQ(spec.covariance(3.0), 0.5);
  EXPECT_THROW(SlowMixSpec{0.0}.validate(), std::invalid_argument);
}

TEST(Regression, PureNoiseGivesWienerPath) {
  ErgodicModelSpec model = ErgodicModelSpec::reference(1);
  model.b1 = [](double, const Vector&) { return 0.0; };
  model.linear_basis = {};
  model.linear_offset = {};
  const TimeGrid grid(2.0, 20);
  RegressionOptions opt;
  opt.refine = 5;
  const auto paths = sim_regression(model, grid, 5, opt);
  const auto w = gen_wiener(grid.refined(5), 1, derive_seed(5, Stream::kNoise)).path();
  for (std::size_t k = 0; k < grid.n_points(); ++k) EXPECT_NEAR(paths.Y.at(k), w.at(5 * k), 1e-12);
}

TEST(Regression, ZeroDiffusionRejected) {
  ErgodicModelSpec model = ErgodicModelSpec::reference(1);
  model.sigma0 = [](double) { return 0.0; };
  EXPECT_THROW(sim_regression(model, TimeGrid(1.0, 10), 1), std::invalid_argument);
}

TEST(Regression, DeterministicAndEnvironmentSplit) {
  const auto model = ErgodicModelSpec::reference(1);
  const TimeGrid grid(5.0, 50);
  const auto a = sim_regression(model, grid, 17);
  const auto b = sim_regression(model, grid, 17);
  EXPECT_EQ(a.Y.values, b.Y.values);
  EXPECT_EQ(a.L.values, b.L.values);

  RegressionSimulator sim(model, grid);
  const auto env_seed = derive_seed(17, Stream::kEnvironment);
  const auto c = sim.simulate_in_environment(sim.environment(env_seed), env_seed, 17);
  EXPECT_EQ(a.Y.values, c.Y.values);

  RegressionOptions fixed;
  fixed.environment_seed = 99;
  const auto d = sim_regression(model, grid, 1, fixed);
  const auto e = sim_regression(model, grid, 2, fixed);
  EXPECT_EQ(d.L.values, e.L.values);
  EXPECT_NE(d.Y.values, e.Y.values);
}

TEST(Regression, TimeAverageMatchesStationaryDrift) {
  // E[(1 + L^2) tanh(U)] = 0 at theta* = 1 with L, U independent and U symmetric.
  const auto model = ErgodicModelSpec::reference(1);
  const TimeGrid grid(20.0, 200);
  RegressionSimulator sim(model, grid, RegressionOptions{2});
  std::vector<double> v;
  for (std::uint64_t s = 0; s < 2000; ++s) v.push_back(sim.simulate(s).Y.at(200) / 20.0);
  expect_mean_near(v, 0.0);
}

TEST(Regression, StrongConvergenceUnderRefinement) {
  const auto model = ErgodicModelSpec::reference(1);
  const TimeGrid fine(4.0, 4000);
  CirculantEmbedding emb(model.slow, fine);
  double e2 = 0.0, e4 = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Engine eng = make_engine(derive_seed(s, Stream::kEnvironment));
    const auto L = emb.sample(eng);
    const auto U = sim_ou(model.ou, fine, derive_seed(s, Stream::kFast)).values;
    const auto dw = gen_wiener(fine, 1, derive_seed(s, Stream::kNoise)).dw;
    const double ref = integrate_regression(model, fine.step(), L, U, dw, 1, 0.0).back();
    const double y20 = integrate_regression(model, fine.step(), L, U, dw, 20, 0.0).back();
    const double y40 = integrate_regression(model, fine.step(), L, U, dw, 40, 0.0).back();
    e2 += (y20 - ref) * (y20 - ref);
    e4 += (y40 - ref) * (y40 - ref);
  }
  const double ratio = std::sqrt(e4 / e2);
  EXPECT_GE(ratio, 1.2);
  EXPECT_LE(ratio, 3.0);
}

TEST(Volatility, ZeroDriftConstantScaleGivesScaledWiener) {
  VolEnvModelSpec model = VolEnvModelSpec::remark(1.5);
  model.x_drift = [](double, double) { return 0.0; };
  model.variance = [](double, double, const Vector& th) { return th[0] * th[0]; };
  model.scale_form = false;
  const TimeGrid grid(1.0, 100);
  VolEnvOptions opt;
  opt.refine = 1;
  const auto p = sim_vol_env(model, grid, 4, opt);
  const auto w = gen_wiener(grid, 1, derive_seed(4, Stream::kNoise)).path();
  for (std::size_t k = 0; k < grid.n_points(); ++k) EXPECT_NEAR(p.Y.at(k), 1.5 * w.at(k), 1e-12);
}

TEST(Volatility, RealizedScaledVarianceNearOne) {
  const auto model = VolEnvModelSpec::remark(1.0);
  const TimeGrid grid(1.0, 1000);
  VolEnvSimulator sim(model, grid);
  std::vector<double> v;
  for (std::uint64_t s = 0; v.size() < 300 && s < 1000; ++s) {
    try {
      const auto p = sim.simulate(s);
      double sum = 0.0;
      for (std::size_t j = 1; j <= 1000; ++j) {
        const double dy = p.Y.at(j) - p.Y.at(j - 1);
        const double x = p.X.at(j - 1);
        sum += dy * dy / ((1.0 + x * x) * grid.step());
      }
      v.push_back(sum / 1000.0);
    } catch (const ExplosionError&) {
    }
  }
  ASSERT_EQ(v.size(), 300u);
  // The fine-grid Euler step makes the left-point ratio biased by O(h); 1% is generous.
  EXPECT_NEAR(mean(v), 1.0, 0.01 + 3.0 * mean_with_se(v).se);
}

TEST(Volatility, DeterministicAndGuarded) {
  const auto model = VolEnvModelSpec::remark(1.0);
  const TimeGrid grid(1.0, 200);
  VolEnvSimulator sim(model, grid);
  std::size_t explosions = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    try {
      const auto a = sim.simulate(s);
      const auto b = sim.simulate(s);
      EXPECT_EQ(a.X.values, b.X.values);
      EXPECT_EQ(a.Y.values, b.Y.values);
      EXPECT_EQ(a.env.values, b.env.values);
    } catch (const ExplosionError& e) {
      ++explosions;
      EXPECT_GT(e.index(), 0u);
      EXPECT_THROW(sim.simulate(s), ExplosionError);
    }
  }
  EXPECT_LT(explosions, 100u);
}

TEST(Mixing, Bounds) {
  const OUSpec ou{1.0, 1.0};
  EXPECT_DOUBLE_EQ(mixing_alpha_bound(ou, 0.0), 0.5);
  EXPECT_LE(mixing_alpha_bound(ou, 10.0) / mixing_alpha_bound(ou, 5.0), std::exp(-5.0) * (1 + 1e-12));
  const SlowMixSpec slow{0.5};
  EXPECT_DOUBLE_EQ(mixing_alpha_bound(slow, 0.0), 0.5);
  EXPECT_NEAR(mixing_alpha_bound(slow, 4000.0) / mixing_alpha_bound(slow, 1000.0), 0.5, 0.05);
  double prev = 1.0;
  for (double h = 0.0; h < 100.0; h += 0.5) {
    const double b = mixing_alpha_bound(slow, h);
    EXPECT_LE(b, prev);
    EXPECT_GE(b, 0.0);
    prev = b;
  }
  EXPECT_THROW(mixing_alpha_bound(ou, -1.0), std::invalid_argument);
}

TEST(Hash, SensitiveToBits) {
  std::vector<double> a{1.0, 2.0}, b{1.0, 2.0000000000000004};
  EXPECT_EQ(hash_values(a), hash_values(a));
  EXPECT_NE(hash_values(a), hash_values(b));
}
