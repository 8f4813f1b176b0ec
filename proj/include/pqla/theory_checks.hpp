#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pqla/models.hpp"
#include "pqla/random_field.hpp"
#include "pqla/rng.hpp"

namespace pqla {

// ---------------------------------------------------------------------------
// Exponent conditions and moment orders
// ---------------------------------------------------------------------------

struct B1Params {
  double alpha = 0.1;
  double rho = 2.0;
  double beta1 = 0.05;
  double rho1 = 0.1;
  double rho2 = 0.3;
  double beta2 = 0.1;

  double beta() const { return alpha / (1.0 - alpha); }
  /// beta1 = alpha/2, rho1 = alpha, rho2 = 3 alpha, beta2 = alpha.
  static B1Params set_i(double alpha, double rho = 2.0);
  /// As set_i with beta2 = 0.
  static B1Params set_ii(double alpha, double rho = 2.0);
  static B1Params from_set(const std::string& set, double alpha, double rho);
};

struct B1Constraint {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct B1Report {
  std::vector<B1Constraint> constraints;
  bool pass() const;
};

/// Evaluates the five inequalities one by one.  Throws std::invalid_argument
/// unless alpha is in (0, 1) and rho > 0.
B1Report check_b1(const B1Params& params);

struct MomentOrders {
  double L = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

/// Throws std::invalid_argument if the parameters violate the conditions or L <= 0.
MomentOrders moment_orders(double L, const B1Params& params);

// ---------------------------------------------------------------------------
// Rosenthal bound
// ---------------------------------------------------------------------------

enum class MixingSource { kOU, kSlowGaussian, kUser };

/// Lag -> alpha-mixing bound.  Lags are in blocks (h = 1, 2, ...).
struct MixingProfile {
  std::function<double(std::size_t)> alpha;
  MixingSource source = MixingSource::kUser;

  /// OU sampled over blocks of length `block`.
  static MixingProfile ou(const OUSpec& spec, double block = 1.0, double constant = 1.0);
  static MixingProfile slow_gaussian(const SlowMixSpec& spec, double block = 1.0);
  static MixingProfile constant(double value);
  /// values[h - 1] is the bound at lag h; lags past the end reuse the last value.
  static MixingProfile table(std::vector<double> values);

  /// Throws std::invalid_argument unless alpha(h) is in [0, 1/2] and
  /// nonincreasing for h = 1 .. max_lag.
  void validate(std::size_t max_lag) const;
};

/// n^{p/2} (1 + sum_h alpha(h)^{1-2/r})^{p/2} + n sum_h (h+1)^{p-2} alpha(h)^{1-p/r},
/// sums over h = 1 .. n-1.  Requires 2 <= p < r and n >= 2.
double rosenthal_rhs(double p, double r, std::size_t n, const MixingProfile& profile);

struct RosenthalRow {
  std::size_t n = 0;
  double lhs = 0.0;        // E max_k |S_k|^p
  double lhs_se = 0.0;
  double lhs_final = 0.0;  // E |S_n|^p
  double moment = 0.0;     // (E |X|^r)^{p/r}
  double bracket = 0.0;
  double ratio = 0.0;
};

/// Generator of one sequence X_1..X_n.
using SequenceGenerator = std::function<std::vector<double>(std::size_t n, Engine& engine)>;

/// Monte Carlo ratio LHS / (moment * bracket) for each n.  Replication i of
/// size n uses engine seed derive_seed(seed, kRosenthal, n * 2^32 + i).  The
/// moment term pools |X_j|^r over j and replications (stationary sequences).
std::vector<RosenthalRow> rosenthal_mc(const SequenceGenerator& generator, double p, double r,
                                       const std::vector<std::size_t>& n_list, std::size_t reps, std::uint64_t seed,
                                       const MixingProfile& profile, unsigned jobs = 1);

struct RosenthalConfig {
  OUSpec ou;
  /// Bounded functional; centred internally by its stationary mean.
  std::function<double(double)> f = [](double u) { return std::tanh(u); };
  double block_length = 1.0;
  std::size_t steps_per_block = 20;
  double p = 2.0;
  double r = 4.0;
  std::vector<std::size_t> n_list{64, 256, 1024, 4096};
  std::size_t reps = 2000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

/// X_j = trapezoid integral of f(U) over block j of a stationary OU path, minus
/// block_length * E f(U_0).
std::vector<RosenthalRow> rosenthal_mc_check(const RosenthalConfig& config);

// ---------------------------------------------------------------------------
// Localisation functional
// ---------------------------------------------------------------------------

struct PsiOptions {
  double r_star = 8.0;
  double eps_star = 0.25;
  std::size_t n_inner = 256;
  double inner_step = 0.1;
  /// Threshold is level * T^{eps_star}.
  double level = 1.0;
};

struct PsiResult {
  int psi = 1;
  double max_block = 0.0;
  std::vector<double> blocks;
};

/// Psi_T = 1 iff max_j E_C[int_{j-1}^j H1(L_t, U_t)^{r*} dt] <= level * T^{eps*},
/// j = 1..ceil(T), the conditional expectation estimated from n_inner fresh
/// stationary OU paths on a grid of step ~inner_step (a multiple of `step`).
/// `L` holds the environment at t_k = k * step covering [0, T].
PsiResult psi_truncation(std::span<const double> L, double step, const ErgodicModelSpec& model, double horizon,
                         const PsiOptions& options, std::uint64_t seed);

/// Same functional with a caller-supplied envelope (for manufactured cases).
PsiResult psi_truncation(std::span<const double> L, double step, const std::function<double(double, double)>& envelope,
                         const OUSpec& ou, double horizon, const PsiOptions& options, std::uint64_t seed);

/// E[H1(L, U)^power] under the stationary law (2-D Gauss-Hermite).
double stationary_envelope_moment(const ErgodicModelSpec& model, double power, std::size_t nodes = 160);

struct PsiStudyRow {
  std::size_t rep = 0;
  int psi = 1;
  double max_block = 0.0;
};

/// Psi_T over `reps` independent environments, each simulated on the inner grid.
std::vector<PsiStudyRow> psi_study(const ErgodicModelSpec& model, double horizon, std::size_t reps,
                                   const PsiOptions& options, std::uint64_t seed, unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Polynomial large-deviation tails
// ---------------------------------------------------------------------------

/// exp(-r^{2 - exponent} / 2)
double pld_threshold(double r, double exponent);

/// For each r, the grid supremum of log Z_T over {u in U_T : |u| >= r} on the
/// lattice spacing * Z^p; -infinity when that set is empty.
std::vector<double> pld_sup_log_z(const FieldEval& eval, const std::vector<double>& r_list, double spacing);

struct PldRow {
  double r = 0.0;
  double threshold = 0.0;
  double prob = 0.0;
  double se = 0.0;
  std::size_t n_eff = 0;
  bool empty = false;
};

struct PldReport {
  std::vector<PldRow> rows;
  double psi_pass_fraction = 1.0;
  std::size_t reps = 0;
  double spacing = 0.0;
  double exponent = 0.0;
};

struct PldConfig {
  ErgodicModelSpec model = ErgodicModelSpec::reference(1);
  double horizon = 100.0;
  double step = 0.01;
  std::size_t refine = 10;
  std::vector<double> r_list{2, 3, 4, 5, 6, 7, 8};
  double exponent = 0.3;
  std::size_t reps = 2000;
  std::uint64_t seed = 1;
  /// u-lattice spacing; must be <= 1/20.
  double spacing = 0.05;
  bool use_psi = true;
  PsiOptions psi;
  unsigned jobs = 1;
};

PldReport pld_tail_mc(const PldConfig& config);

/// Least-squares slope of log prob on log r over rows with prob > 0.
double pld_log_slope(const PldReport& report);

void write_b1_csv(std::ostream& out, const B1Report& report);
void write_rosenthal_csv(std::ostream& out, const std::vector<RosenthalRow>& rows);
void write_pld_csv(std::ostream& out, const PldReport& report);
void write_psi_csv(std::ostream& out, const std::vector<PsiStudyRow>& rows);

}  // namespace pqla
