#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pgff {

struct LmOptions {
  int max_iterations = 500;
  double damping_init = 1e-2;
  double damping_raise = 10.0;
  double damping_lower = 0.1;
  double gradient_tolerance = 1e-8;  ///< on the scale-free gradient, see levenberg_marquardt
  double cost_tolerance = 1e-10;     ///< relative decrease of an accepted step
  double max_damping = 1e16;
};

struct LmResult {
  Eigen::VectorXd theta;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> accepted_costs;  ///< cost after every accepted step, starting with the initial cost
};

/**
 * @brief Marquardt-scaled Levenberg-Marquardt on a sum-of-squares cost r^T r.
 *
 * `Problem` provides
 *
 *     Eigen::Index size() const;
 *     double cost(const Eigen::VectorXd& theta);
 *     double normal_equations(const Eigen::VectorXd& theta, Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr);
 *
 * where jtj = J^T J and jtr = J^T r for the residual Jacobian J = dr/dtheta,
 * and the return value is the cost at theta. Each step solves
 * (J^T J + lambda diag(J^T J)) delta = -J^T r; rejected steps raise lambda.
 * The gradient test uses |D^-1 J^T r|_inf / |r| with D = sqrt(diag(J^T J)):
 * the largest cosine between a Jacobian column and the residual, which does
 * not depend on the units of the residual or the parameters.
 */
template <class Problem>
LmResult levenberg_marquardt(Problem& problem, Eigen::VectorXd theta, const LmOptions& opt) {
  const Eigen::Index p = problem.size();
  Eigen::MatrixXd jtj(p, p);
  Eigen::VectorXd jtr(p);
  LmResult res;
  double cost = problem.normal_equations(theta, jtj, jtr);
  res.initial_cost = cost;
  res.accepted_costs.push_back(cost);
  double lambda = opt.damping_init;
  res.stop_reason = "iteration limit";

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (!std::isfinite(cost)) {
      res.stop_reason = "non-finite cost";
      break;
    }
    if (cost == 0.0) {
      res.converged = true;
      res.stop_reason = "zero cost";
      break;
    }
    const Eigen::VectorXd diag = jtj.diagonal();
    const double floor = std::max(diag.maxCoeff(), 1e-300) * 1e-20;
    const Eigen::VectorXd d = diag.cwiseMax(floor).cwiseSqrt();
    const Eigen::VectorXd grad = jtr.cwiseQuotient(d);
    if (grad.cwiseAbs().maxCoeff() / std::sqrt(cost) < opt.gradient_tolerance) {
      res.converged = true;
      res.stop_reason = "gradient tolerance";
      break;
    }
    Eigen::MatrixXd scaled = d.cwiseInverse().asDiagonal() * jtj * d.cwiseInverse().asDiagonal();
    ++res.iterations;
    bool accepted = false;
    while (lambda <= opt.max_damping) {
      Eigen::MatrixXd damped = scaled;
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd step = -damped.ldlt().solve(grad);
      const Eigen::VectorXd trial = theta + step.cwiseQuotient(d);
      const double trial_cost = problem.cost(trial);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double decrease = (cost - trial_cost) / cost;
        theta = trial;
        lambda = std::max(lambda * opt.damping_lower, 1e-15);
        cost = problem.normal_equations(theta, jtj, jtr);
        res.accepted_costs.push_back(cost);
        accepted = true;
        if (decrease < opt.cost_tolerance) {
          res.converged = true;
          res.stop_reason = "cost tolerance";
        }
        break;
      }
      lambda *= opt.damping_raise;
    }
    if (!accepted) {
      res.converged = true;
      res.stop_reason = "damping limit";
      break;
    }
    if (res.converged) break;
  }
  res.theta = std::move(theta);
  res.final_cost = cost;
  return res;
}

}  // namespace pgff
