#include "pqla/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace pqla {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("time grid: horizon T must be positive and finite");
  }
  if (n_steps < 2) {
    throw std::invalid_argument("time grid: n_steps must be at least 2");
  }
}

double TimeGrid::time(std::size_t k) const {
  if (k == n_steps_) return horizon_;
  return horizon_ * static_cast<double>(k) / static_cast<double>(n_steps_);
}

TimeGrid TimeGrid::refined(std::size_t factor) const {
  if (factor == 0) throw std::invalid_argument("time grid: refinement factor must be >= 1");
  return TimeGrid(horizon_, n_steps_ * factor);
}

std::vector<double> SamplePath::component(std::size_t d) const {
  std::vector<double> out(grid.n_points());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = at(k, d);
  return out;
}

void SamplePath::validate() const {
  if (dim == 0) throw std::invalid_argument("sample path '" + label + "': dim must be >= 1");
  if (values.size() != grid.n_points() * dim) {
    throw std::invalid_argument("sample path '" + label + "': expected " +
                                std::to_string(grid.n_points() * dim) + " values, got " +
                                std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("sample path '" + label + "': non-finite value at row " +
                                  std::to_string(i / dim));
    }
  }
}

SamplePath WienerIncrements::path(const std::string& label) const {
  SamplePath p{grid, dim, std::vector<double>(grid.n_points() * dim, 0.0), seed, label};
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    for (std::size_t d = 0; d < dim; ++d) p.at(k + 1, d) = p.at(k, d) + at(k, d);
  }
  return p;
}

std::vector<double> subsample(std::span<const double> fine, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("subsample: stride must be >= 1");
  std::vector<double> out;
  out.reserve(fine.size() / stride + 1);
  for (std::size_t k = 0; k < fine.size(); k += stride) out.push_back(fine[k]);
  return out;
}

}  // namespace pqla
