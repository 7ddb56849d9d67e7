#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pgff/core/pgnn.hpp"
#include "pgff/core/seed.hpp"
#include "pgff/ident/criterion.hpp"
#include "pgff/ident/levenberg_marquardt.hpp"
#include "pgff/plant/dataset.hpp"

namespace pgff {

struct TrainConfig {
  int restarts = 10;
  int max_iterations = 500;
  double damping_init = 1e-2;
  double damping_raise = 10.0;
  double damping_lower = 0.1;
  double gradient_tolerance = 1e-8;
  double cost_tolerance = 1e-10;
  std::uint64_t seed = 1;
  double init_scale = 1.0;
  int threads = 1;

  void validate() const {
    if (restarts < 1) throw ContractError("training needs at least one restart");
    if (max_iterations < 0) throw ContractError("max_iterations must be non-negative");
    if (!(gradient_tolerance > 0.0 && cost_tolerance > 0.0)) {
      throw ContractError("training tolerances must be positive");
    }
    if (!(damping_init > 0.0 && damping_raise > 1.0 && damping_lower > 0.0 && damping_lower < 1.0)) {
      throw ContractError("damping factors need init > 0, raise > 1, 0 < lower < 1");
    }
  }

  LmOptions lm_options() const {
    LmOptions o;
    o.max_iterations = max_iterations;
    o.damping_init = damping_init;
    o.damping_raise = damping_raise;
    o.damping_lower = damping_lower;
    o.gradient_tolerance = gradient_tolerance;
    o.cost_tolerance = cost_tolerance;
    return o;
  }
};

struct RestartOutcome {
  std::uint64_t seed = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

struct FitReport {
  PgnnModel model;
  Eigen::VectorXd parameters;
  double best_cost = 0.0;
  double initial_cost = 0.0;  ///< of the selected restart
  int iterations = 0;
  bool converged = false;
  std::size_t best_restart = 0;
  std::vector<RestartOutcome> restarts;
  std::vector<double> accepted_costs;  ///< trace of the selected restart
};

/**
 * @brief Least-squares view of the regularized criterion for the LM core.
 *
 * Residual rows are (target - prediction) / sqrt(N) followed by
 * L^T (anchor - theta_S) with Lambda = L L^T; the regularization rows enter
 * the normal equations as Lambda directly.
 */
class PgnnProblem {
 public:
  PgnnProblem(const PgnnModel& templ, const RegressionData& data, const IdentCriterion& criterion,
              Eigen::Index chunk = 2048)
      : model_(templ), data_(data), criterion_(criterion), chunk_(chunk) {
    const auto n = static_cast<Eigen::Index>(data.size());
    base_.resize(n);
    features_.resize(3, n);
    if (model_.physics_enabled) {
      for (Eigen::Index k = 0; k < n; ++k) {
        const Regressor phi = data.regressors.col(k);
        base_[k] = physics_base(model_.physics, phi);
        features_.col(k) = physics_features(model_.physics, phi, model_.orders);
      }
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(model_.parameter_count()); }

  double cost(const Eigen::VectorXd& theta) { return evaluate(theta, nullptr, nullptr); }

  double normal_equations(const Eigen::VectorXd& theta, Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
    return evaluate(theta, &jtj, &jtr);
  }

 private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::MatrixXd* jtj, Eigen::VectorXd* jtr) {
    set_model_parameters(model_, theta);
    const Eigen::Index n = data_.targets.size();
    const Eigen::Index p = size();
    const auto np = static_cast<Eigen::Index>(model_.physics_parameter_count());
    const double inv_n = 1.0 / static_cast<double>(n);
    if (jtj != nullptr) {
      jtj->setZero(p, p);
      jtr->setZero(p);
    }
    double sse = 0.0;
    Eigen::MatrixXd jac_t;
    Eigen::RowVectorXd out;
    for (Eigen::Index start = 0; start < n; start += chunk_) {
      const Eigen::Index b = std::min(chunk_, n - start);
      out.resize(b);
      if (jtj != nullptr) jac_t.resize(p, b);
      nn_batch(model_.network, data_.regressors.middleCols(start, b), out,
               jtj != nullptr ? &jac_t : nullptr, np);
      Eigen::ArrayXd err = data_.targets.segment(start, b).array() - out.transpose().array();
      if (np > 0) {
        err -= base_.segment(start, b).array() +
               (model_.physics.coefficients.transpose() * features_.middleCols(start, b)).transpose().array();
        if (jtj != nullptr) jac_t.topRows(3) = features_.middleCols(start, b);
      }
      sse += err.square().sum();
      if (jtj != nullptr) {
        jtj->selfadjointView<Eigen::Lower>().rankUpdate(jac_t, inv_n);
        jtr->noalias() -= inv_n * (jac_t * err.matrix());
      }
    }
    double total = sse * inv_n;
    if (!criterion_.regularized.empty()) {
      const auto k = static_cast<Eigen::Index>(criterion_.regularized.size());
      Eigen::VectorXd delta(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        delta[i] = criterion_.anchor[i] - model_.physics.coefficients[criterion_.regularized[i]];
      }
      total += delta.dot(criterion_.lambda * delta);
      if (jtj != nullptr) {
        const Eigen::VectorXd ld = criterion_.lambda * delta;
        for (Eigen::Index i = 0; i < k; ++i) {
          const int a = criterion_.regularized[i];
          (*jtr)[a] -= ld[i];
          for (Eigen::Index j = 0; j < k; ++j) {
            const int c = criterion_.regularized[j];
            if (a >= c) (*jtj)(a, c) += criterion_.lambda(i, j);
          }
        }
      }
    }
    if (jtj != nullptr) *jtj = jtj->selfadjointView<Eigen::Lower>();
    return total;
  }

  PgnnModel model_;
  const RegressionData& data_;
  IdentCriterion criterion_;
  Eigen::Index chunk_;
  Eigen::VectorXd base_;
  Eigen::MatrixXd features_;
};

/**
 * @brief Multi-start Levenberg-Marquardt training of a PGNN.
 *
 * Every restart keeps the template's physics coefficients (set them to the
 * anchor before calling), draws fresh hidden weights and zeroes the output
 * layer, so it starts at the physics model. The restart with the smallest
 * final cost is returned. Restart seeds derive from `config.seed` and the
 * restart index; restarts may run on several threads without changing the
 * result.
 *
 * @throws TrainingError when every restart ends with a non-finite cost.
 */
inline FitReport train_pgnn(const PgnnModel& templ, const RegressionData& data,
                            const IdentCriterion& criterion, const TrainConfig& config) {
  config.validate();
  criterion.validate();
  templ.validate();
  if (data.size() == 0) throw ContractError("cannot train on an empty data set");
  if (templ.orders != data.orders) throw ContractError("template orders differ from the data");
  if (templ.direction() != data.direction || criterion.direction != data.direction) {
    throw ContractError("template, criterion and data directions differ");
  }
  if (!templ.physics_enabled && !criterion.regularized.empty()) {
    throw ContractError("criterion regularizes a disabled physics model");
  }

  const auto restarts = static_cast<std::size_t>(config.restarts);
  std::vector<LmResult> results(restarts);
  std::vector<PgnnModel> starts(restarts, templ);
  for (std::size_t i = 0; i < restarts; ++i) {
    std::mt19937_64 rng(derive_seed(config.seed, i));
    initialize_network(starts[i].network, rng, config.init_scale);
  }
  const LmOptions lm = config.lm_options();
  auto run = [&](std::size_t i) {
    PgnnProblem problem(starts[i], data, criterion);
    results[i] = levenberg_marquardt(problem, model_parameters(starts[i]), lm);
  };
  const auto threads = static_cast<std::size_t>(std::max(1, config.threads));
  if (threads <= 1 || restarts <= 1) {
    for (std::size_t i = 0; i < restarts; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(threads, restarts); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < restarts; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  FitReport report;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < restarts; ++i) {
    const auto& r = results[i];
    report.restarts.push_back({derive_seed(config.seed, i), r.initial_cost, r.final_cost,
                               r.iterations, r.converged, r.stop_reason});
    if (std::isfinite(r.final_cost) && r.final_cost < best) {
      best = r.final_cost;
      report.best_restart = i;
    }
  }
  if (!std::isfinite(best)) {
    throw TrainingError("all " + std::to_string(restarts) + " restarts ended with a non-finite cost");
  }
  const auto& win = results[report.best_restart];
  report.model = starts[report.best_restart];
  set_model_parameters(report.model, win.theta);
  report.parameters = win.theta;
  report.best_cost = win.final_cost;
  report.initial_cost = win.initial_cost;
  report.iterations = win.iterations;
  report.converged = win.converged;
  report.accepted_costs = win.accepted_costs;
  return report;
}

}  // namespace pgff
