#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pqla {

/// Uniform grid t_k = k * T / n_steps on [0, T].
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Throws std::invalid_argument unless T > 0 and n_steps >= 2.
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const { return horizon_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_points() const { return n_steps_ + 1; }
  double step() const { return horizon_ / static_cast<double>(n_steps_); }
  double time(std::size_t k) const;

  /// Same horizon, n_steps * factor steps.
  TimeGrid refined(std::size_t factor) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_ = 1.0;
  std::size_t n_steps_ = 2;
};

/// Values of a (possibly vector-valued) process on a TimeGrid, stored row-major
/// as (n_points x dim).
struct SamplePath {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string label;

  double at(std::size_t k, std::size_t d = 0) const { return values[k * dim + d]; }
  double& at(std::size_t k, std::size_t d = 0) { return values[k * dim + d]; }
  std::vector<double> component(std::size_t d) const;

  /// Throws std::invalid_argument on a size mismatch or non-finite value.
  void validate() const;
};

/// n_steps independent N(0, h I_dim) increments, row-major (n_steps x dim).
struct WienerIncrements {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> dw;
  std::uint64_t seed = 0;

  double at(std::size_t k, std::size_t d = 0) const { return dw[k * dim + d]; }
  /// Cumulative sum starting from w_0 = 0.
  SamplePath path(const std::string& label = "w") const;
};

/// Every `stride`-th value of a scalar sequence, starting at index 0.
std::vector<double> subsample(std::span<const double> fine, std::size_t stride);

}  // namespace pqla
