#pragma once

#include <functional>
#include <string>

#include "json.hpp"
#include "pqla/random_field.hpp"

namespace pqla {

/// Prior density on the parameter box.  An empty density means uniform.
/// Evaluated only inside the box; every evaluation must be finite and > 0.
struct Prior {
  std::function<double(const Vector&)> density;

  static Prior uniform() { return Prior{}; }
  /// Throws std::invalid_argument for a non-finite or non-positive value.
  double log_density(const Vector& theta) const;
};

enum class EstimatorKind { kQmle, kQbe };

std::string to_string(EstimatorKind kind);
/// Accepts "M", "qmle", "B", "qbe"; throws std::invalid_argument otherwise.
EstimatorKind estimator_kind_from_string(const std::string& text);

struct QmleOptions {
  std::size_t grid_points = 101;
  std::size_t max_iterations = 100;
  double gradient_tolerance = 1e-8;
};

struct QbeOptions {
  /// Points per axis of the base grid; 0 selects default_grid_points(p).
  std::size_t grid_points = 0;
  double relative_tolerance = 1e-6;
  std::size_t max_refinements = 4;
};

struct EstimateRecord {
  EstimatorKind kind = EstimatorKind::kQmle;
  Vector theta_hat;
  Vector u_hat;
  int psi = 1;
  Matrix gamma_T;
  /// QMLE: H(theta_hat).  QBE: log of the integral of exp(H) over the box.
  double value = 0.0;
  /// log of the integral of Z_T over U_T (QBE with localisation only, else NaN).
  double mass_logZ = std::numeric_limits<double>::quiet_NaN();
  bool boundary_flag = false;
  bool flat_flag = false;
  std::size_t iterations = 0;
};

/// Grid scan followed by projected Newton with backtracking; coordinate
/// golden-section search replaces Newton where the Hessian is not negative
/// definite on the free coordinates.  The result never has a lower field
/// value than the best grid point.  Ties on the grid go to the lowest
/// lexicographic index.
EstimateRecord qmle(const QuasiLikelihoodField& field, const ThetaBox& box, const QmleOptions& options = {});

/// Posterior mean by tensor trapezoid quadrature in log space, refined
/// (n -> 2n - 1 points per axis) until the estimate moves by less than
/// relative_tolerance or max_refinements is reached.
EstimateRecord qbe(const QuasiLikelihoodField& field, const Prior& prior, const ThetaBox& box,
                   const QbeOptions& options = {});

/// a_T^{-1} (theta_hat - theta*) for diagonal a_T.
Vector standardize(const Vector& theta_hat, const Vector& theta_star, const Vector& rate);

/// Fills u_hat and gamma_T = -a_T hess H(theta*) a_T, and for QBE records
/// mass_logZ = log int_{U_T} Z_T du.
void localize(EstimateRecord& record, const FieldEval& eval);

/// Closed-form maximizer B^{-1}(A - c) of the Ito-sum field for a model
/// linear in theta, clamped coordinatewise to the box.  Computed directly
/// from the paths.  Throws EstimationError if B is singular.
Vector qmle_linear_oracle(const RegressionPaths& paths, const ErgodicModelSpec& model);

/// theta^2 = T^{-1} sum_j (dY_j)^2 / (1 + X_{j-1}^2), positive root clamped
/// to the box.  Requires a scale-form model.  All-zero increments give the
/// lower box edge with the boundary flag set.
EstimateRecord qmle_vol_oracle(const VolEnvPaths& paths, const VolEnvModelSpec& model);

nlohmann::json to_json(const EstimateRecord& record);
EstimateRecord estimate_from_json(const nlohmann::json& j);

}  // namespace pqla
