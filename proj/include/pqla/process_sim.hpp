#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pqla/grid.hpp"
#include "pqla/models.hpp"
#include "pqla/rng.hpp"

namespace pqla {

/// Throws std::invalid_argument if dim == 0.
WienerIncrements gen_wiener(const TimeGrid& grid, std::size_t dim, std::uint64_t seed);

/// Exact-transition OU path.  Starts from the stationary law unless `start`
/// is given.
SamplePath sim_ou(const OUSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                  std::optional<double> start = std::nullopt);

/// Circulant-embedding sampler for a stationary Gaussian process with
/// covariance SlowMixSpec::covariance on a uniform grid.  Negative embedding
/// eigenvalues are clipped to zero; construction fails if the clipped mass
/// (relative to the total absolute spectrum) exceeds `clip_tolerance`.
/// Sampling is const and safe to call concurrently.
class CirculantEmbedding {
 public:
  CirculantEmbedding(const SlowMixSpec& spec, const TimeGrid& grid, double clip_tolerance = 1e-8);

  std::size_t n_points() const { return n_points_; }
  std::size_t embedding_size() const { return eigenvalues_.size(); }
  double clipped_mass() const { return clipped_mass_; }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }

  std::vector<double> sample(Engine& engine) const;

  /// Covariance at lags 0..n_points-1 implied by the clipped spectrum.
  std::vector<double> implied_covariance() const;

 private:
  struct Plan;
  std::size_t n_points_ = 0;
  std::vector<double> eigenvalues_;
  double clipped_mass_ = 0.0;
  std::shared_ptr<Plan> plan_;
};

SamplePath sim_slow_gaussian(const SlowMixSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                             double clip_tolerance = 1e-8);

struct RegressionOptions {
  std::size_t refine = 10;
  double y0 = 0.0;
  /// Overrides the environment sub-seed (fixed-environment replication).
  std::optional<std::uint64_t> environment_seed;
};

/// L, U, Y on the observation grid.
struct RegressionPaths {
  SamplePath L;
  SamplePath U;
  SamplePath Y;
  std::uint64_t seed = 0;
  std::uint64_t environment_seed = 0;

  const TimeGrid& grid() const { return Y.grid; }
};

/// Euler scheme for Y driven by given fine-grid skeletons of L, U and the
/// Wiener increments.  `stride` > 1 integrates with step stride * fine_step,
/// using L and U at every stride-th point and the summed increments.  Returns
/// Y at the points of the coarse integration grid.
std::vector<double> integrate_regression(const ErgodicModelSpec& model, double fine_step,
                                         std::span<const double> L, std::span<const double> U,
                                         std::span<const double> dw, std::size_t stride, double y0);

/// Simulator bound to (model, observation grid, options).  Holds the
/// circulant embedding for the fine grid so repeated replications reuse it.
class RegressionSimulator {
 public:
  RegressionSimulator(ErgodicModelSpec model, const TimeGrid& grid, RegressionOptions options = {});

  const TimeGrid& grid() const { return grid_; }
  const TimeGrid& fine_grid() const { return fine_grid_; }
  const ErgodicModelSpec& model() const { return model_; }

  /// L on the fine grid.
  std::vector<double> environment(std::uint64_t environment_seed) const;

  RegressionPaths simulate(std::uint64_t seed) const;
  RegressionPaths simulate_in_environment(std::span<const double> fine_environment,
                                          std::uint64_t environment_seed, std::uint64_t seed) const;

 private:
  ErgodicModelSpec model_;
  TimeGrid grid_;
  TimeGrid fine_grid_;
  RegressionOptions options_;
  CirculantEmbedding embedding_;
};

RegressionPaths sim_regression(const ErgodicModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                               const RegressionOptions& options = {});

struct VolEnvOptions {
  std::size_t refine = 10;
  double y0 = 0.0;
  std::optional<std::uint64_t> environment_seed;
};

/// Environment B, state X and observation Y on the observation grid.
struct VolEnvPaths {
  SamplePath env;
  SamplePath X;
  SamplePath Y;
  std::uint64_t seed = 0;
  std::uint64_t environment_seed = 0;

  const TimeGrid& grid() const { return Y.grid; }
};

class VolEnvSimulator {
 public:
  VolEnvSimulator(VolEnvModelSpec model, const TimeGrid& grid, VolEnvOptions options = {});

  const TimeGrid& grid() const { return grid_; }
  const VolEnvModelSpec& model() const { return model_; }

  /// Environment Wiener path B on the fine grid.
  std::vector<double> environment(std::uint64_t environment_seed) const;

  /// Throws ExplosionError when |X| exceeds the model's guard.
  VolEnvPaths simulate(std::uint64_t seed) const;
  VolEnvPaths simulate_in_environment(std::span<const double> fine_environment,
                                      std::uint64_t environment_seed, std::uint64_t seed) const;

 private:
  VolEnvModelSpec model_;
  TimeGrid grid_;
  TimeGrid fine_grid_;
  VolEnvOptions options_;
};

VolEnvPaths sim_vol_env(const VolEnvModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                        const VolEnvOptions& options = {});

/// Working alpha-mixing bounds for the simulators.  OU: min(1/2, C e^{-kappa h})
/// from the maximal correlation of a Gaussian Markov process.  Slow Gaussian:
/// min(1/2, c(h)).  Both equal 1/2 at h = 0.
double mixing_alpha_bound(const OUSpec& spec, double lag, double constant = 1.0);
double mixing_alpha_bound(const SlowMixSpec& spec, double lag);

/// 64-bit FNV-1a over the bit patterns of a sequence of doubles.
std::uint64_t hash_values(std::span<const double> values);

}  // namespace pqla
