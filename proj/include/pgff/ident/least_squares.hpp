#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "pgff/core/physics.hpp"
#include "pgff/plant/dataset.hpp"

namespace pgff {

struct LinearFit {
  Eigen::VectorXd theta;
  Eigen::MatrixXd moment;      ///< M = (1/N) sum phi phi^T
  double condition_number = 0;  ///< of M after unit-diagonal (Jacobi) scaling
};

/// Scaled moment matrices above this condition number count as singular.
inline constexpr double kMaxMomentCondition = 1e12;

/**
 * @brief Least squares theta = M^-1 (1/N) sum phi * target, one regressor per column.
 *
 * Solved on the Jacobi-scaled normal equations so that badly scaled columns
 * (metres next to newtons) keep full precision.
 *
 * @throws ExcitationError when M is singular (data not persistently exciting).
 */
inline LinearFit fit_linear_ls(const Eigen::Ref<const Eigen::MatrixXd>& regressors,
                               const Eigen::Ref<const Eigen::VectorXd>& targets) {
  if (regressors.cols() != targets.size()) {
    throw ContractError("regressor count differs from target count");
  }
  if (regressors.cols() == 0) throw ExcitationError("no data for least squares");
  const double inv_n = 1.0 / static_cast<double>(regressors.cols());
  LinearFit fit;
  fit.moment = inv_n * regressors * regressors.transpose();
  const Eigen::VectorXd moment_rhs = inv_n * regressors * targets;
  const Eigen::VectorXd diag = fit.moment.diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag[i] > 0.0)) throw ExcitationError("regressor entry " + std::to_string(i) + " is identically zero");
  }
  const Eigen::VectorXd s = diag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = s.asDiagonal() * fit.moment * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  fit.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(fit.condition_number < kMaxMomentCondition)) {
    throw ExcitationError("moment matrix is singular (condition " +
                          detail::format_double(fit.condition_number) +
                          "); data is not persistently exciting");
  }
  fit.theta = s.asDiagonal() * scaled.ldlt().solve(s.asDiagonal() * moment_rhs);
  return fit;
}

/// Physics feature matrix (3 x N) and the targets with the coefficient-free part removed.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> physics_regression(const RegressionData& data,
                                                                     double sample_time) {
  PhysicsLinearMotionParams layout;
  layout.direction = data.direction;
  layout.sample_time = sample_time;
  Eigen::MatrixXd f(3, static_cast<Eigen::Index>(data.size()));
  Eigen::VectorXd target(static_cast<Eigen::Index>(data.size()));
  for (Eigen::Index k = 0; k < f.cols(); ++k) {
    const Regressor phi = data.regressors.col(k);
    f.col(k) = physics_features(layout, phi, data.orders);
    target[k] = data.targets[k] - physics_base(layout, phi);
  }
  return {std::move(f), std::move(target)};
}

/**
 * @brief Closed-form minimizer of the physics-only MSE criterion.
 *
 * Works for both directions: forward pairs give the forward coefficients,
 * inverse pairs the inverse ones.
 */
inline PhysicsLinearMotionParams fit_physics_ls(const RegressionData& data, double sample_time) {
  const auto [features, target] = physics_regression(data, sample_time);
  PhysicsLinearMotionParams p;
  p.direction = data.direction;
  p.sample_time = sample_time;
  p.coefficients = fit_linear_ls(features, target).theta;
  p.validate();
  return p;
}

}  // namespace pgff
