#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pqla/experiments.hpp"

using namespace pqla;

namespace {

ExperimentConfig small_regression(std::size_t reps = 6) {
  ExperimentConfig c;
  c.horizon = 10.0;
  c.step = 0.01;
  c.refine = 2;
  c.reps = reps;
  c.seed = 3;
  c.limit_mc = 10000;
  c.qbe.grid_points = 101;
  return c;
}

ExperimentConfig small_volatility(std::size_t reps = 6) {
  ExperimentConfig c;
  c.model.kind = ModelKind::kVolatility;
  c.horizon = 1.0;
  c.n_obs = 200;
  c.refine = 2;
  c.reps = reps;
  c.seed = 4;
  c.qbe.grid_points = 101;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pqla_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

bool same_rows(const std::vector<MCRow>& a, const std::vector<MCRow>& b) {
  if (a.size() != b.size()) return false;
  std::ostringstream sa, sb;
  write_rows_csv(sa, a, 1);
  write_rows_csv(sb, b, 1);
  return sa.str() == sb.str();
}

}  // namespace

TEST(MonteCarlo, DeterministicAndWorkerIndependent) {
  auto c = small_regression();
  const auto a = mc_estimate(c);
  const auto b = mc_estimate(c);
  c.jobs = 3;
  const auto d = mc_estimate(c);
  EXPECT_TRUE(same_rows(a.rows, b.rows));
  EXPECT_TRUE(same_rows(a.rows, d.rows));
  EXPECT_EQ(to_json(a.summary), to_json(d.summary));
  ASSERT_EQ(a.rows.size(), 12u);
  EXPECT_EQ(a.rows[0].kind, EstimatorKind::kQmle);
  EXPECT_EQ(a.rows[1].kind, EstimatorKind::kQbe);
  EXPECT_EQ(a.rows[3].rep, 1u);
}

TEST(MonteCarlo, UnconditionalReplicationMatchesDirectSimulation) {
  const auto c = small_regression(2);
  const auto r = mc_estimate(c);
  const auto model = c.model.regression();
  const auto paths = sim_regression(model, TimeGrid(10.0, 1000), derive_seed(c.seed, Stream::kReplication, 1),
                                    RegressionOptions{2});
  const Vector oracle = qmle_linear_oracle(paths, model);
  EXPECT_NEAR(r.rows[2].theta_hat[0], oracle[0], 1e-8);
}

TEST(MonteCarlo, FixedEnvironmentSharesEnvironment) {
  auto c = small_regression(4);
  c.conditioning = Conditioning::kFixedEnvironment;
  const auto r = mc_estimate(c);
  for (const auto& row : r.rows) EXPECT_EQ(row.env_hash, r.rows[0].env_hash);
  EXPECT_NE(r.rows[0].theta_hat[0], r.rows[2].theta_hat[0]);
  const auto u = mc_estimate(small_regression(4));
  EXPECT_NE(u.rows[0].env_hash, u.rows[2].env_hash);
}

TEST(MonteCarlo, VolatilityRunsAndReportsFailures) {
  auto c = small_volatility(30);
  const auto r = mc_estimate(c);
  EXPECT_EQ(r.summary.reps, 30u);
  std::size_t failed = 0;
  for (const auto& row : r.rows) {
    if (row.failed) {
      ++failed;
      EXPECT_TRUE(std::isnan(row.theta_hat[0]));
    } else {
      EXPECT_GE(row.theta_hat[0], 0.5);
      EXPECT_LE(row.theta_hat[0], 2.0);
    }
  }
  EXPECT_EQ(failed, 2 * r.summary.failures);
  EXPECT_NEAR(r.summary.failure_rate, r.summary.failures / 30.0, 1e-15);
  // Gamma_n = 2 / theta^2 exactly for the scale-form model.
  EXPECT_NEAR(r.summary.gamma(0, 0), 2.0, 1e-12);
}

TEST(MonteCarlo, ConfigValidation) {
  auto c = small_volatility();
  c.studentize = Studentization::kLimit;
  EXPECT_THROW(mc_estimate(c), std::invalid_argument);
  auto d = small_regression();
  d.reps = 0;
  EXPECT_THROW(mc_estimate(d), std::invalid_argument);
}

TEST(Normality, NeedsEnoughReplications) {
  const auto r = mc_estimate(small_regression(10));
  EXPECT_THROW(normality_test(r, EstimatorKind::kQmle), std::invalid_argument);
}

TEST(Moments, TargetsFromGamma) {
  MCReport r;
  r.config.estimators = {EstimatorKind::kQmle};
  for (int i = 0; i < 4; ++i) {
    MCRow row;
    row.rep = static_cast<std::size_t>(i);
    row.theta_hat = row.u_hat = row.z = Vector::Constant(1, i % 2 ? 1.0 : -1.0);
    r.rows.push_back(row);
  }
  r.summary = summarize(r.rows, r.config.estimators, Matrix::Constant(1, 1, 4.0));
  const auto rows = moment_convergence(r, EstimatorKind::kQmle, {2.0, 4.0});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].quantity, "u[0]^2");
  EXPECT_DOUBLE_EQ(rows[0].empirical, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].target, 0.25);
  EXPECT_EQ(rows[1].quantity, "|u|^2");
  EXPECT_DOUBLE_EQ(rows[1].target, 0.25);
  EXPECT_DOUBLE_EQ(rows[2].target, 3.0 / 16.0);
}

TEST(Report, WriteLoadAndTamper) {
  const auto r = mc_estimate(small_regression(5));
  const auto dir = temp_dir("report");
  write_report(r, dir);
  const auto back = load_report(dir);
  EXPECT_TRUE(same_rows(back.rows, r.rows));
  EXPECT_EQ(to_json(back.summary), to_json(r.summary));

  std::ifstream in(dir / "rows.csv");
  std::stringstream text;
  text << in.rdbuf();
  in.close();
  std::string s = text.str();
  const auto line2 = s.find('\n', s.find('\n') + 1);
  std::size_t comma = line2;
  for (int k = 0; k < 3; ++k) comma = s.find(',', comma + 1);  // u_hat of the first data row
  s.insert(comma + 1, "9");
  std::ofstream(dir / "rows.csv") << s;
  EXPECT_THROW(load_report(dir), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Laq, RequiresThreeHorizons) {
  LaqConfig c;
  c.horizons = {50.0};
  EXPECT_THROW(laq_shrink_study(c), std::invalid_argument);
}

TEST(Laq, SmallStudyRuns) {
  LaqConfig c;
  c.horizons = {5.0, 10.0, 20.0};
  c.step = 0.02;
  c.refine = 2;
  c.reps = 8;
  c.spacing = 0.05;
  c.limit_mc = 10000;
  const auto rows = laq_shrink_study(c);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_GE(r.median, 0.0);
    EXPECT_LE(r.q25, r.median);
    EXPECT_LE(r.median, r.q75);
  }
}

TEST(A5, GaussianMassMatchesClosedForm) {
  // Z(u) = exp(-Gamma u^2 / 2): 1 / int Z = sqrt(Gamma / (2 pi)).
  const double T = 2500.0, G = 2.0;
  auto field = std::make_shared<FunctionField>(1, [=](const Vector& th) { return -0.5 * G * T * th[0] * th[0]; });
  const FieldEval eval(field, ThetaBox::cube(1, -1, 1), Vector::Zero(1), Vector::Constant(1, 1 / std::sqrt(T)), 0);
  auto rec = qbe(*field, Prior::uniform(), eval.box());
  localize(rec, eval);
  MCReport r;
  r.config.estimators = {EstimatorKind::kQbe};
  MCRow row;
  row.kind = EstimatorKind::kQbe;
  row.theta_hat = row.u_hat = row.z = Vector::Zero(1);
  row.mass_logZ = rec.mass_logZ;
  r.rows = {row};
  const auto q = a5_mass_diagnostic(r);
  ASSERT_EQ(q.size(), 3u);
  EXPECT_NEAR(q[1], std::sqrt(G / (2 * M_PI)), 1e-6);
}

TEST(RowsCsv, RoundTripWithFailures) {
  auto c = small_volatility(12);
  const auto r = mc_estimate(c);
  std::stringstream ss;
  write_rows_csv(ss, r.rows, 1);
  const auto back = read_rows_csv(ss);
  EXPECT_TRUE(same_rows(back, r.rows));
  std::istringstream bad("rep,estimator\n1,M\n");
  EXPECT_THROW(read_rows_csv(bad), std::runtime_error);
}
