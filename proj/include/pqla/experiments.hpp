#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pqla/estimators.hpp"
#include "pqla/stats.hpp"
#include "pqla/theory_checks.hpp"

namespace pqla {

enum class ModelKind { kRegression, kVolatility };
enum class Conditioning { kUnconditional, kFixedEnvironment };
/// kLimit: z = Gamma^{1/2} u with the limit information.  kPerReplication:
/// z = Gamma_n^{1/2} u with Gamma_n evaluated on the replication's own path.
enum class Studentization { kLimit, kPerReplication };

std::string to_string(ModelKind kind);
std::string to_string(Conditioning mode);
std::string to_string(Studentization mode);
ModelKind model_kind_from_string(const std::string& text);
Conditioning conditioning_from_string(const std::string& text);
Studentization studentization_from_string(const std::string& text);

struct ModelConfig {
  ModelKind kind = ModelKind::kRegression;
  std::size_t dim = 1;
  /// Empty: the reference value of the chosen model.
  std::vector<double> theta_star;
  double ou_kappa = 1.0;
  double ou_s = 1.4142135623730951;
  double slow_a = 0.5;
  double x0 = 0.0;
  double explosion_guard = 1e6;

  ErgodicModelSpec regression() const;
  VolEnvModelSpec volatility() const;
};

struct ExperimentConfig {
  ModelConfig model;
  double horizon = 200.0;
  /// Observation step (regression) ...
  double step = 0.002;
  /// ... or number of observations (volatility).
  std::size_t n_obs = 1000;
  std::size_t refine = 10;
  std::vector<EstimatorKind> estimators{EstimatorKind::kQmle, EstimatorKind::kQbe};
  std::size_t reps = 500;
  std::uint64_t seed = 1;
  Conditioning conditioning = Conditioning::kUnconditional;
  std::optional<Studentization> studentize;
  QmleOptions qmle;
  QbeOptions qbe;
  bool linear_fast_path = true;
  bool compute_psi = false;
  PsiOptions psi;
  /// Replace psi.level by the stationary moment E[H1^{r*}].
  bool psi_stationary_level = false;
  /// Monte Carlo size for the limit information of the regression model.
  std::size_t limit_mc = 1000000;
  unsigned jobs = 1;

  Studentization studentization() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct MCRow {
  std::size_t rep = 0;
  EstimatorKind kind = EstimatorKind::kQmle;
  Vector theta_hat;
  Vector u_hat;
  Vector z;
  int psi = 1;
  bool boundary = false;
  double mass_logZ = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t env_hash = 0;
  bool failed = false;
};

struct EstimatorSummary {
  EstimatorKind kind = EstimatorKind::kQmle;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  Vector mean_u;
  Matrix cov_u;
  std::vector<KSResult> ks;
  double psi_pass_rate = 1.0;
  double boundary_rate = 0.0;
  /// Quantiles (5%, 50%, 95%) of 1 / int Z_T over U_T; empty for QMLE.
  std::vector<double> inverse_mass_quantiles;
};

struct MCSummary {
  double level = 0.01;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  Matrix gamma;
  std::vector<EstimatorSummary> estimators;
};

struct MCReport {
  ExperimentConfig config;
  std::vector<MCRow> rows;
  MCSummary summary;
};

/// Limit information of the regression model by Monte Carlo over the
/// stationary law (n_mc draws).
Matrix limit_gamma(const ErgodicModelSpec& model, std::size_t n_mc, std::uint64_t seed);

/// Gamma_n = n^{-1} sum_j (1/2) (dS/S)(dS/S)' at theta along the path.
Matrix volatility_gamma(const VolEnvPaths& paths, const VolEnvModelSpec& model, const Vector& theta);

/// Simulate -> field -> estimators -> standardize (-> Psi_T) for reps
/// replications.  Replication i uses derive_seed(seed, kReplication, i); the
/// fixed-environment mode shares derive_seed(seed, kEnvironment, 0).  Rows are
/// ordered by (rep, estimator) and do not depend on the worker count.
MCReport mc_estimate(const ExperimentConfig& config);

/// Recomputes the summary from rows.
MCSummary summarize(const std::vector<MCRow>& rows, const std::vector<EstimatorKind>& kinds, const Matrix& gamma,
                    double level = 0.01);
nlohmann::json to_json(const MCSummary& summary);

/// KS per coordinate of z for one estimator.  Throws std::invalid_argument
/// for fewer than 100 successful replications or a degenerate sample.
std::vector<KSResult> normality_test(const MCReport& report, EstimatorKind kind, double level = 0.01);

struct MomentRow {
  std::string quantity;  // "u[k]^p" or "|u|^2"
  double p = 0.0;
  double empirical = 0.0;
  double se = 0.0;
  double target = 0.0;
  double rel_error = 0.0;
};

/// Empirical E[u_k^p] against the raw moments of N(0, Gamma^{-1}) per
/// coordinate, plus E|u|^2 against trace(Gamma^{-1}).  `gamma_inverse`
/// defaults to the inverse of the summary's Gamma.
std::vector<MomentRow> moment_convergence(const MCReport& report, EstimatorKind kind, const std::vector<double>& p_list,
                                          std::optional<Matrix> gamma_inverse = std::nullopt);

struct LaqConfig {
  ModelConfig model;
  std::vector<double> horizons{50, 100, 200, 400};
  double step = 0.01;
  std::size_t refine = 10;
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  double radius = 3.0;
  double spacing = 0.01;
  std::size_t limit_mc = 1000000;
  bool linear_fast_path = true;
  unsigned jobs = 1;
};

struct LaqRow {
  double horizon = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Per horizon, the median over replications of sup_{|u| <= radius} |r_T(u)|.
/// Throws std::invalid_argument for fewer than 3 horizons.
std::vector<LaqRow> laq_shrink_study(const LaqConfig& config);

/// Quantiles (5%, 50%, 95%) of 1 / int_{U_T} Z_T over the QBE rows.
std::vector<double> a5_mass_diagnostic(const MCReport& report);

/// rows.csv and summary.json in `dir` (created if missing).
void write_report(const MCReport& report, const std::filesystem::path& dir);
/// Loads rows and summary; throws std::runtime_error if the summary
/// recomputed from the rows differs from the stored one.
MCReport load_report(const std::filesystem::path& dir);

void write_rows_csv(std::ostream& out, const std::vector<MCRow>& rows, std::size_t dim);
std::vector<MCRow> read_rows_csv(std::istream& in);

}  // namespace pqla
