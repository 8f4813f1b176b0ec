#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pqla/stats.hpp"
#include "pqla/theory_checks.hpp"

using namespace pqla;

TEST(B1, ReferenceSets) {
  EXPECT_TRUE(check_b1(B1Params::set_i(0.1)).pass());
  const auto bad = check_b1(B1Params::set_i(0.25));
  EXPECT_FALSE(bad.pass());
  int failures = 0;
  for (const auto& c : bad.constraints) {
    if (!c.pass) {
      ++failures;
      EXPECT_EQ(c.name, "1-2beta2-rho2>0");
      EXPECT_NEAR(c.lhs, -0.25, 1e-12);
    }
  }
  EXPECT_EQ(failures, 1);
  EXPECT_TRUE(check_b1(B1Params::set_ii(0.3)).pass());
  EXPECT_EQ(check_b1(B1Params::set_i(0.1)).constraints.size(), 5u);
}

TEST(B1, SetRangesOverAlphaGrid) {
  for (double a = 0.01; a < 0.99; a += 0.01) {
    EXPECT_EQ(check_b1(B1Params::set_i(a)).pass(), a < 0.2 - 1e-12) << a;
    EXPECT_EQ(check_b1(B1Params::set_ii(a)).pass(), a < 1.0 / 3.0 - 1e-12) << a;
  }
  EXPECT_THROW(check_b1(B1Params::set_i(1.0)), std::invalid_argument);
  EXPECT_THROW(check_b1(B1Params::set_i(0.1, 0.0)), std::invalid_argument);
  EXPECT_THROW(B1Params::from_set("iii", 0.1, 2), std::invalid_argument);
}

TEST(MomentOrders, Formulae) {
  const auto m = moment_orders(4.0, B1Params::set_i(0.1));
  EXPECT_NEAR(m.m1, 4.0 / 0.9, 1e-12);
  EXPECT_NEAR(m.m2, 8.0, 1e-12);
  EXPECT_NEAR(m.m3, 360.0, 1e-9);
  EXPECT_NEAR(m.m4, 360.0, 1e-9);
  EXPECT_NEAR(moment_orders(4.0, B1Params::set_ii(0.1)).m2, 4.0 / 0.7, 1e-12);
  B1Params zero = B1Params::set_i(0.1);
  zero.rho1 = 1e-300;
  EXPECT_NEAR(moment_orders(4.0, zero).m1, 4.0, 1e-12);
  EXPECT_THROW(moment_orders(4.0, B1Params::set_i(0.25)), std::invalid_argument);
}

TEST(Rosenthal, IndependentBracket) {
  for (std::size_t n : {2u, 10u, 1000u}) {
    EXPECT_NEAR(rosenthal_rhs(2.0, 4.0, n, MixingProfile::constant(0.0)), static_cast<double>(n), 1e-12);
  }
}

TEST(Rosenthal, MaximalMixingClosedForm) {
  for (std::size_t n : {2u, 17u, 512u}) {
    const double nd = static_cast<double>(n);
    const double c = std::pow(0.5, 0.5);
    const double closed = nd * (1 + (nd - 1) * c) + nd * (nd - 1) * c;
    EXPECT_NEAR(rosenthal_rhs(2.0, 4.0, n, MixingProfile::constant(0.5)), closed, 1e-12 * closed);
  }
}

TEST(Rosenthal, ExponentialProfileConverges) {
  const MixingProfile prof{[](std::size_t h) { return std::min(0.5, std::exp(-static_cast<double>(h))); }};
  double prev = 0.0, last_gap = 1.0;
  for (int k = 6; k <= 14; ++k) {
    const double n = std::pow(2.0, k);
    const double scaled = rosenthal_rhs(2.0, 4.0, static_cast<std::size_t>(n), prof) / n;
    if (k > 6) {
      EXPECT_GE(scaled, prev * (1 - 1e-12));
      last_gap = std::abs(scaled - prev) / scaled;
    }
    prev = scaled;
  }
  EXPECT_LT(last_gap, 1e-9);
}

TEST(Rosenthal, ProfileValidation) {
  EXPECT_THROW(MixingProfile::constant(0.7).validate(3), std::invalid_argument);
  EXPECT_THROW(MixingProfile::table({0.1, 0.2}).validate(2), std::invalid_argument);
  EXPECT_NO_THROW(MixingProfile::table({0.4, 0.2}).validate(10));
  EXPECT_THROW(rosenthal_rhs(2.0, 2.0, 10, MixingProfile::constant(0.0)), std::invalid_argument);
  EXPECT_THROW(rosenthal_rhs(2.0, 4.0, 1, MixingProfile::constant(0.0)), std::invalid_argument);
  EXPECT_NO_THROW(MixingProfile::ou(OUSpec{}, 1.0).validate(100));
  EXPECT_NO_THROW(MixingProfile::slow_gaussian(SlowMixSpec{}, 1.0).validate(100));
}

TEST(Rosenthal, ZeroSequence) {
  const auto rows = rosenthal_mc([](std::size_t n, Engine&) { return std::vector<double>(n, 0.0); }, 2.0, 4.0, {8}, 10,
                                 1, MixingProfile::constant(0.0));
  EXPECT_EQ(rows[0].lhs, 0.0);
  EXPECT_EQ(rows[0].ratio, 0.0);
}

TEST(Rosenthal, IidSigns) {
  auto signs = [](std::size_t n, Engine& e) {
    std::vector<double> x(n);
    for (auto& v : x) v = (e() & 1U) ? 1.0 : -1.0;
    return x;
  };
  const std::size_t n = 64, reps = 4000;
  const auto rows = rosenthal_mc(signs, 2.0, 4.0, {n}, reps, 3, MixingProfile::constant(0.0), 2);
  const auto& r = rows[0];
  EXPECT_DOUBLE_EQ(r.bracket, 64.0);
  EXPECT_DOUBLE_EQ(r.moment, 1.0);
  // E S_n^2 = n; sd of S_n^2 is n sqrt(2).
  EXPECT_NEAR(r.lhs_final, 64.0, 4 * 64 * std::sqrt(2.0 / reps));
  // Doob: n <= E max S_k^2 <= 4 n.
  EXPECT_GE(r.ratio, 1.0);
  EXPECT_LE(r.ratio, 4.0);
}

TEST(Rosenthal, OuBlocksSmall) {
  RosenthalConfig c;
  c.n_list = {16, 64};
  c.reps = 200;
  const auto rows = rosenthal_mc_check(c);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_LT(r.ratio, 1.0);
  }
  std::ostringstream out;
  write_rosenthal_csv(out, rows);
  EXPECT_EQ(out.str().rfind("n,lhs,bracket,ratio\n", 0), 0u);
}

TEST(Psi, BoundedEnvelopeAlwaysPasses) {
  const std::vector<double> L(1001, 5.0);
  const auto r = psi_truncation(L, 0.01, [](double, double u) { return std::abs(std::tanh(u)); }, OUSpec{}, 10.0,
                                PsiOptions{}, 1);
  EXPECT_EQ(r.psi, 1);
  EXPECT_EQ(r.blocks.size(), 10u);
  EXPECT_LE(r.max_block, 1.0);
}

TEST(Psi, ManufacturedSpike) {
  std::vector<double> L(1001, 0.0);
  for (std::size_t k = 300; k < 400; ++k) L[k] = 3.0;  // block 4
  auto env = [](double l, double) { return 1.0 + l * l; };
  const auto r = psi_truncation(L, 0.01, env, OUSpec{}, 10.0, PsiOptions{}, 1);
  EXPECT_EQ(r.psi, 0);
  EXPECT_NEAR(r.max_block, std::pow(10.0, 8.0), 1e-6 * std::pow(10.0, 8.0));
  EXPECT_NEAR(r.blocks[0], 1.0, 1e-12);
  EXPECT_EQ(r.max_block, r.blocks[3]);
}

TEST(Psi, DeterministicAndMonotoneInEps) {
  const auto model = ErgodicModelSpec::reference(1);
  const auto rows_a = psi_study(model, 20.0, 20, PsiOptions{}, 5);
  const auto rows_b = psi_study(model, 20.0, 20, PsiOptions{}, 5, 2);
  for (std::size_t i = 0; i < rows_a.size(); ++i) EXPECT_EQ(rows_a[i].max_block, rows_b[i].max_block);
  PsiOptions loose;
  loose.eps_star = 0.5;
  const auto rows_c = psi_study(model, 20.0, 20, loose, 5);
  for (std::size_t i = 0; i < rows_a.size(); ++i) EXPECT_GE(rows_c[i].psi, rows_a[i].psi);
  EXPECT_THROW(psi_truncation(std::vector<double>(3, 0.0), 0.1, model, 20.0, PsiOptions{}, 1), std::invalid_argument);
}

TEST(Psi, StationaryMomentOfReferenceEnvelope) {
  // Pure L-dependence: E[(1 + L^2)^2] = 6 checks the quadrature path.
  ErgodicModelSpec model = ErgodicModelSpec::reference(1);
  model.envelope = [](double l, double) { return 1.0 + l * l; };
  EXPECT_NEAR(stationary_envelope_moment(model, 2.0), 6.0, 1e-9);
}

TEST(Pld, ZeroRadiusAndEmptySet) {
  const auto model = ErgodicModelSpec::reference(1);
  const auto paths = sim_regression(model, TimeGrid(20.0, 2000), 1, RegressionOptions{2});
  const FieldEval eval(make_regression_field(paths, model), model.box, model.theta_star,
                       Vector::Constant(1, 1 / std::sqrt(20.0)), 0);
  const auto sups = pld_sup_log_z(eval, {0.0, 1000.0}, 0.05);
  EXPECT_GE(sups[0], 0.0);
  EXPECT_GE(sups[0], std::log(pld_threshold(0.0, 0.3)));
  EXPECT_TRUE(std::isinf(sups[1]) && sups[1] < 0);
  EXPECT_DOUBLE_EQ(pld_threshold(0.0, 0.3), 1.0);
}

TEST(Pld, SmallRunProbabilities) {
  PldConfig c;
  c.horizon = 20.0;
  c.step = 0.02;
  c.refine = 2;
  c.reps = 40;
  c.r_list = {0.0, 2.0, 4.0, 100.0};
  c.use_psi = false;
  const auto rep = pld_tail_mc(c);
  EXPECT_DOUBLE_EQ(rep.rows[0].prob, 1.0);
  EXPECT_DOUBLE_EQ(rep.rows[3].prob, 0.0);
  EXPECT_TRUE(rep.rows[3].empty);
  for (std::size_t k = 1; k < rep.rows.size(); ++k) EXPECT_LE(rep.rows[k].prob, rep.rows[k - 1].prob);
  c.spacing = 0.1;
  EXPECT_THROW(pld_tail_mc(c), std::invalid_argument);
}

TEST(Pld, SlopeUsesPositiveRows) {
  PldReport rep;
  rep.rows = {{2.0, 0, 0.1}, {4.0, 0, 0.1 / 8.0}, {8.0, 0, 0.0}};
  EXPECT_NEAR(pld_log_slope(rep), -3.0, 1e-12);
}
