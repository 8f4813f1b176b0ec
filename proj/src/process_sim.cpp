#include "pqla/process_sim.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>

#include "pqla/error.hpp"

namespace pqla {

namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

}  // namespace

WienerIncrements gen_wiener(const TimeGrid& grid, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("gen_wiener: dim must be >= 1");
  WienerIncrements out{grid, dim, std::vector<double>(grid.n_steps() * dim), seed};
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(grid.step()));
  for (double& v : out.dw) v = normal(engine);
  return out;
}

SamplePath sim_ou(const OUSpec& spec, const TimeGrid& grid, std::uint64_t seed, std::optional<double> start) {
  spec.validate();
  SamplePath path{grid, 1, std::vector<double>(grid.n_points()), seed, "U"};
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal;
  const double decay = std::exp(-spec.kappa * grid.step());
  const double innovation_sd = std::sqrt(spec.stationary_variance() * -std::expm1(-2.0 * spec.kappa * grid.step()));
  path.values[0] = start ? *start : std::sqrt(spec.stationary_variance()) * normal(engine);
  for (std::size_t k = 1; k < path.values.size(); ++k) {
    path.values[k] = decay * path.values[k - 1] + innovation_sd * normal(engine);
  }
  return path;
}

// ---------------------------------------------------------------------------
// Circulant embedding
// ---------------------------------------------------------------------------

struct CirculantEmbedding::Plan {
  explicit Plan(std::size_t n) : size(n) {
    FftwBuffer in(n), out(n);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    forward = fftw_plan_dft_1d(static_cast<int>(n), in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    if (forward == nullptr) throw std::runtime_error("FFTW planning failed");
  }
  ~Plan() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  std::size_t size;
  fftw_plan forward = nullptr;
};

CirculantEmbedding::CirculantEmbedding(const SlowMixSpec& spec, const TimeGrid& grid, double clip_tolerance)
    : n_points_(grid.n_points()) {
  spec.validate();
  const std::size_t m = n_points_;
  const std::size_t n = 2 * (m - 1);
  plan_ = std::make_shared<Plan>(n);

  FftwBuffer row(n), spectrum(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lag = k < m ? k : n - k;
    row.data[k][0] = spec.covariance(grid.step() * static_cast<double>(lag));
    row.data[k][1] = 0.0;
  }
  fftw_execute_dft(plan_->forward, row.data, spectrum.data);

  eigenvalues_.resize(n);
  double negative = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = spectrum.data[k][0];
    total += std::abs(lambda);
    if (lambda < 0.0) {
      negative += -lambda;
      eigenvalues_[k] = 0.0;
    } else {
      eigenvalues_[k] = lambda;
    }
  }
  clipped_mass_ = total > 0.0 ? negative / total : 0.0;
  if (clipped_mass_ > clip_tolerance) {
    throw SimulationError("circulant embedding: clipped negative-eigenvalue mass " +
                          std::to_string(clipped_mass_) + " exceeds tolerance " +
                          std::to_string(clip_tolerance) + "; use a larger embedding");
  }
}

std::vector<double> CirculantEmbedding::sample(Engine& engine) const {
  const std::size_t n = eigenvalues_.size();
  FftwBuffer in(n), out(n);
  std::normal_distribution<double> normal;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = std::sqrt(eigenvalues_[k] * inv_n);
    in.data[k][0] = scale * normal(engine);
    in.data[k][1] = scale * normal(engine);
  }
  fftw_execute_dft(plan_->forward, in.data, out.data);
  std::vector<double> x(n_points_);
  for (std::size_t k = 0; k < n_points_; ++k) x[k] = out.data[k][0];
  return x;
}

std::vector<double> CirculantEmbedding::implied_covariance() const {
  // c_j = (1/n) sum_k lambda_k e^{2 pi i jk/n}; lambda is real and symmetric so
  // the forward transform gives the same real part.
  const std::size_t n = eigenvalues_.size();
  FftwBuffer in(n), out(n);
  for (std::size_t k = 0; k < n; ++k) {
    in.data[k][0] = eigenvalues_[k];
    in.data[k][1] = 0.0;
  }
  fftw_execute_dft(plan_->forward, in.data, out.data);
  std::vector<double> c(n_points_);
  for (std::size_t j = 0; j < n_points_; ++j) c[j] = out.data[j][0] / static_cast<double>(n);
  return c;
}

SamplePath sim_slow_gaussian(const SlowMixSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                             double clip_tolerance) {
  CirculantEmbedding embedding(spec, grid, clip_tolerance);
  Engine engine = make_engine(seed);
  return SamplePath{grid, 1, embedding.sample(engine), seed, "L"};
}

// ---------------------------------------------------------------------------
// Regression model
// ---------------------------------------------------------------------------

std::vector<double> integrate_regression(const ErgodicModelSpec& model, double fine_step,
                                         std::span<const double> L, std::span<const double> U,
                                         std::span<const double> dw, std::size_t stride, double y0) {
  if (stride == 0) throw std::invalid_argument("integrate_regression: stride must be >= 1");
  if (L.size() != U.size() || dw.size() + 1 != L.size()) {
    throw std::invalid_argument("integrate_regression: skeleton lengths disagree");
  }
  if (dw.size() % stride != 0) {
    throw std::invalid_argument("integrate_regression: stride must divide the number of fine steps");
  }
  const std::size_t steps = dw.size() / stride;
  const double dt = fine_step * static_cast<double>(stride);
  std::vector<double> y(steps + 1);
  y[0] = y0;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t i = k * stride;
    double noise = 0.0;
    for (std::size_t r = 0; r < stride; ++r) noise += dw[i + r];
    const double next = y[k] + model.drift(L[i], U[i], model.theta_star) * dt + model.diffusion(L[i], U[i]) * noise;
    if (!std::isfinite(next)) {
      throw SimulationError("regression simulation: non-finite state at fine index " + std::to_string(i + stride));
    }
    y[k + 1] = next;
  }
  return y;
}

RegressionSimulator::RegressionSimulator(ErgodicModelSpec model, const TimeGrid& grid, RegressionOptions options)
    : model_(std::move(model)),
      grid_(grid),
      fine_grid_(grid.refined(options.refine == 0 ? 1 : options.refine)),
      options_(options),
      embedding_(model_.slow, fine_grid_) {
  if (options.refine == 0) throw std::invalid_argument("regression simulation: refinement factor must be >= 1");
  model_.validate();
}

std::vector<double> RegressionSimulator::environment(std::uint64_t environment_seed) const {
  Engine engine = make_engine(environment_seed);
  return embedding_.sample(engine);
}

RegressionPaths RegressionSimulator::simulate(std::uint64_t seed) const {
  const std::uint64_t env_seed = options_.environment_seed.value_or(derive_seed(seed, Stream::kEnvironment));
  const auto fine_l = environment(env_seed);
  return simulate_in_environment(fine_l, env_seed, seed);
}

RegressionPaths RegressionSimulator::simulate_in_environment(std::span<const double> fine_environment,
                                                             std::uint64_t environment_seed,
                                                             std::uint64_t seed) const {
  if (fine_environment.size() != fine_grid_.n_points()) {
    throw std::invalid_argument("regression simulation: environment path does not match the fine grid");
  }
  const SamplePath fine_u = sim_ou(model_.ou, fine_grid_, derive_seed(seed, Stream::kFast));
  const WienerIncrements dw = gen_wiener(fine_grid_, 1, derive_seed(seed, Stream::kNoise));
  const std::size_t stride = options_.refine;
  const auto fine_y = integrate_regression(model_, fine_grid_.step(), fine_environment, fine_u.values, dw.dw, 1,
                                           options_.y0);
  RegressionPaths out;
  out.seed = seed;
  out.environment_seed = environment_seed;
  out.L = SamplePath{grid_, 1, subsample(fine_environment, stride), environment_seed, "L"};
  out.U = SamplePath{grid_, 1, subsample(fine_u.values, stride), seed, "U"};
  out.Y = SamplePath{grid_, 1, subsample(fine_y, stride), seed, "Y"};
  return out;
}

RegressionPaths sim_regression(const ErgodicModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                               const RegressionOptions& options) {
  return RegressionSimulator(model, grid, options).simulate(seed);
}

// ---------------------------------------------------------------------------
// Volatility model in a random environment
// ---------------------------------------------------------------------------

VolEnvSimulator::VolEnvSimulator(VolEnvModelSpec model, const TimeGrid& grid, VolEnvOptions options)
    : model_(std::move(model)),
      grid_(grid),
      fine_grid_(grid.refined(options.refine == 0 ? 1 : options.refine)),
      options_(options) {
  if (options.refine == 0) throw std::invalid_argument("volatility simulation: refinement factor must be >= 1");
  model_.validate();
}

std::vector<double> VolEnvSimulator::environment(std::uint64_t environment_seed) const {
  return gen_wiener(fine_grid_, 1, environment_seed).path("B").values;
}

VolEnvPaths VolEnvSimulator::simulate(std::uint64_t seed) const {
  const std::uint64_t env_seed = options_.environment_seed.value_or(derive_seed(seed, Stream::kEnvironment));
  const auto fine_b = environment(env_seed);
  return simulate_in_environment(fine_b, env_seed, seed);
}

VolEnvPaths VolEnvSimulator::simulate_in_environment(std::span<const double> fine_environment,
                                                     std::uint64_t environment_seed, std::uint64_t seed) const {
  if (fine_environment.size() != fine_grid_.n_points()) {
    throw std::invalid_argument("volatility simulation: environment path does not match the fine grid");
  }
  const WienerIncrements dw = gen_wiener(fine_grid_, 1, derive_seed(seed, Stream::kNoise));
  const WienerIncrements dw_state = gen_wiener(fine_grid_, 1, derive_seed(seed, Stream::kStateNoise));
  const std::size_t n = fine_grid_.n_steps();
  const double dt = fine_grid_.step();
  std::vector<double> x(n + 1), y(n + 1);
  x[0] = model_.x0;
  y[0] = options_.y0;
  for (std::size_t k = 0; k < n; ++k) {
    const double env = fine_environment[k];
    const double sigma = std::sqrt(model_.variance(env, x[k], model_.theta_star));
    const double drift_y = model_.y_drift ? model_.y_drift(fine_grid_.time(k), env, x[k]) : 0.0;
    y[k + 1] = y[k] + drift_y * dt + sigma * dw.dw[k];
    x[k + 1] = x[k] + model_.x_drift(env, x[k]) * dt + dw_state.dw[k];
    if (!std::isfinite(x[k + 1]) || std::abs(x[k + 1]) > model_.explosion_guard || !std::isfinite(y[k + 1])) {
      throw ExplosionError("volatility simulation: explosion guard tripped at fine index " + std::to_string(k + 1) +
                               " (t = " + std::to_string(fine_grid_.time(k + 1)) + ")",
                           k + 1);
    }
  }
  const std::size_t stride = options_.refine;
  VolEnvPaths out;
  out.seed = seed;
  out.environment_seed = environment_seed;
  out.env = SamplePath{grid_, 1, subsample(fine_environment, stride), environment_seed, "B"};
  out.X = SamplePath{grid_, 1, subsample(x, stride), seed, "X"};
  out.Y = SamplePath{grid_, 1, subsample(y, stride), seed, "Y"};
  return out;
}

VolEnvPaths sim_vol_env(const VolEnvModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                        const VolEnvOptions& options) {
  return VolEnvSimulator(model, grid, options).simulate(seed);
}

double mixing_alpha_bound(const OUSpec& spec, double lag, double constant) {
  spec.validate();
  if (lag < 0.0) throw std::invalid_argument("mixing bound: lag must be >= 0");
  return std::min(0.5, constant * std::exp(-spec.kappa * lag));
}

double mixing_alpha_bound(const SlowMixSpec& spec, double lag) {
  spec.validate();
  if (lag < 0.0) throw std::invalid_argument("mixing bound: lag must be >= 0");
  return std::min(0.5, spec.covariance(lag));
}

std::uint64_t hash_values(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace pqla
