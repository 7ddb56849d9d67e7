#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pgff/core/pgnn.hpp"
#include "pgff/plant/dataset.hpp"

namespace pgff {

/**
 * @brief Regularized MSE criterion.
 *
 *     V(theta) = 1/N sum (target - prediction)^2 + (anchor - theta_S)^T Lambda (anchor - theta_S)
 *
 * theta_S is the subset `regularized` of the three physics coefficients:
 * all of them for the physics-anchored criterion, only zeta (everything but
 * the input coefficient psi) for the affine-in-input model class.
 */
struct IdentCriterion {
  ModelDirection direction = ModelDirection::forward;
  std::vector<int> regularized;
  Eigen::VectorXd anchor;
  Eigen::MatrixXd lambda;

  void validate() const {
    const auto k = static_cast<Eigen::Index>(regularized.size());
    if (anchor.size() != k || lambda.rows() != k || lambda.cols() != k) {
      throw ContractError("criterion anchor and Lambda must match the regularized block");
    }
    for (int i : regularized) {
      if (i < 0 || i > 2) throw ContractError("regularized index outside the physics block");
    }
    if (k == 0) return;
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if ((lambda - lambda.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ContractError("Lambda must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lambda, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw ContractError("Lambda must be positive semi-definite");
    }
  }
};

/// No regularization: plain MSE.
inline IdentCriterion mse_criterion(ModelDirection dir) {
  IdentCriterion c;
  c.direction = dir;
  c.anchor.resize(0);
  c.lambda.resize(0, 0);
  return c;
}

/// All physics coefficients anchored to `anchor` with Lambda = scale * I.
inline IdentCriterion physics_anchored_criterion(const PhysicsLinearMotionParams& anchor, double scale) {
  IdentCriterion c;
  c.direction = anchor.direction;
  c.regularized = {0, 1, 2};
  c.anchor = anchor.coefficients;
  c.lambda = scale * Eigen::MatrixXd::Identity(3, 3);
  c.validate();
  return c;
}

/// Only zeta anchored; the input coefficient psi is left free.
inline IdentCriterion zeta_anchored_criterion(const PhysicsLinearMotionParams& anchor, double scale) {
  if (anchor.direction != ModelDirection::forward) {
    throw ContractError("the zeta-only criterion applies to forward models");
  }
  IdentCriterion c;
  c.direction = anchor.direction;
  c.regularized = {0, 1};
  c.anchor = anchor.coefficients.head(2);
  c.lambda = scale * Eigen::MatrixXd::Identity(2, 2);
  c.validate();
  return c;
}

inline double regularization_penalty(const PgnnModel& model, const IdentCriterion& c) {
  if (c.regularized.empty()) return 0.0;
  if (!model.physics_enabled) throw ContractError("criterion regularizes a disabled physics model");
  Eigen::VectorXd d(static_cast<Eigen::Index>(c.regularized.size()));
  for (std::size_t i = 0; i < c.regularized.size(); ++i) {
    d[static_cast<Eigen::Index>(i)] = c.anchor[static_cast<Eigen::Index>(i)] -
                                      model.physics.coefficients[c.regularized[i]];
  }
  return d.dot(c.lambda * d);
}

inline double cost_regularized(const PgnnModel& model, const RegressionData& data,
                               const IdentCriterion& c) {
  c.validate();
  if (c.direction != data.direction || model.direction() != data.direction) {
    throw ContractError("criterion, model and data directions differ");
  }
  if (model.orders != data.orders) throw ContractError("model and data orders differ");
  if (data.size() == 0) throw ContractError("empty data set");
  double sse = 0.0;
  for (Eigen::Index k = 0; k < data.targets.size(); ++k) {
    const double e = data.targets[k] - pgnn_predict(model, data.regressors.col(k));
    sse += e * e;
  }
  return sse / static_cast<double>(data.size()) + regularization_penalty(model, c);
}

}  // namespace pgff
