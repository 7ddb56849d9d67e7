#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pgff/core/pgnn.hpp"
#include "pgff/core/seed.hpp"
#include "pgff/ident/levenberg_marquardt.hpp"
#include "pgff/plant/clm.hpp"
#include "pgff/plant/dataset.hpp"

namespace pgff {

struct OePrediction {
  std::vector<double> y;
  bool diverged = false;
  std::size_t diverged_at = 0;  ///< first sample beyond the guard; y is truncated there
};

/**
 * @brief Free-run (output-error) simulation of a one-step predictor.
 *
 * The first orders.warmup() outputs are taken from `initial`; afterwards the
 * predictor's own outputs fill the output lags. `predict` maps a forward
 * regressor to y_hat. The run stops, flagged, once |y_hat| exceeds `guard`.
 */
template <class Predictor>
OePrediction predict_oe(Predictor&& predict, const ModelOrders& orders, std::span<const double> initial,
                        std::span<const double> u, double guard = 1e6) {
  orders.validate();
  const std::size_t warm = orders.warmup();
  if (initial.size() < warm) throw ColdStartError("free-run prediction needs the first warm-up outputs");
  OePrediction out;
  out.y.assign(initial.begin(), initial.begin() + static_cast<std::ptrdiff_t>(std::min(warm, u.size())));
  for (std::size_t t = warm; t < u.size(); ++t) {
    out.y.push_back(0.0);
    const double v = predict(build_regressor(out.y, u, t, orders));
    if (!std::isfinite(v) || std::abs(v) > guard) {
      out.y.pop_back();
      out.diverged = true;
      out.diverged_at = t;
      break;
    }
    out.y.back() = v;
  }
  return out;
}

/// Free-run prediction of a PGNN.
inline OePrediction predict_oe(const PgnnModel& model, std::span<const double> initial, std::span<const double> u,
                               double guard = 1e6) {
  if (model.direction() != ModelDirection::forward) throw ContractError("free-run prediction needs a forward model");
  return predict_oe([&](const Regressor& phi) { return pgnn_predict(model, phi); }, model.orders, initial, u, guard);
}

namespace detail {
// Output-error least squares for the linear model y_hat = theta^T phi_hat, with the
// simulated outputs in phi_hat; sensitivities follow the same recursion.
class LinearOeProblem {
 public:
  LinearOeProblem(const Measurements& m, const ModelOrders& orders) : m_(m), orders_(orders) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(orders_.size()); }

  double cost(const Eigen::VectorXd& theta) { return run(theta, nullptr, nullptr); }
  double normal_equations(const Eigen::VectorXd& theta, Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
    return run(theta, &jtj, &jtr);
  }

 private:
  double run(const Eigen::VectorXd& theta, Eigen::MatrixXd* jtj, Eigen::VectorXd* jtr) {
    const std::size_t n = m_.size();
    const std::size_t warm = orders_.warmup();
    const auto p = size();
    const auto na = static_cast<std::size_t>(orders_.na);
    std::vector<double> yhat(m_.y.begin(), m_.y.begin() + static_cast<std::ptrdiff_t>(warm));
    std::vector<Eigen::VectorXd> sens(warm, Eigen::VectorXd::Zero(p));
    if (jtj != nullptr) {
      jtj->setZero(p, p);
      jtr->setZero(p);
    }
    const double inv_n = 1.0 / static_cast<double>(n - warm);
    double sse = 0.0;
    for (std::size_t t = warm; t < n; ++t) {
      yhat.push_back(0.0);
      const Regressor phi = build_regressor(yhat, m_.u, t, orders_);
      const double pred = theta.dot(phi);
      yhat.back() = pred;
      if (!std::isfinite(pred) || std::abs(pred) > 1e12) return std::numeric_limits<double>::infinity();
      const double e = m_.y[t] - pred;
      sse += e * e;
      if (jtj != nullptr) {
        Eigen::VectorXd g = phi;
        for (std::size_t i = 0; i < na; ++i) g += theta[static_cast<Eigen::Index>(i)] * sens[t - 1 - i];
        jtj->noalias() += inv_n * g * g.transpose();
        jtr->noalias() -= inv_n * e * g;
        sens.push_back(std::move(g));
      }
    }
    return sse * inv_n;
  }

  const Measurements& m_;
  ModelOrders orders_;
};
}  // namespace detail

/**
 * @brief Output-error fit of a linear model y_hat(t) = theta^T phi_hat(t).
 *
 * Minimizes the mean squared free-run simulation error with
 * Levenberg-Marquardt, starting from `initial` (typically the ARX estimate).
 */
inline LmResult fit_linear_oe(const Measurements& m, const ModelOrders& orders, const Eigen::VectorXd& initial,
                              const LmOptions& options = {}) {
  m.validate();
  if (m.size() <= orders.warmup()) throw ContractError("record too short for the model orders");
  if (initial.size() != static_cast<Eigen::Index>(orders.size())) {
    throw ContractError("initial parameter vector does not match the orders");
  }
  detail::LinearOeProblem problem(m, orders);
  return levenberg_marquardt(problem, initial, options);
}

struct ConsistencyRow {
  std::size_t samples = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::vector<double> errors;  ///< one per trial, in trial order
};

/// Linear-interpolation quantile of unsorted data, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/**
 * @brief Error-versus-N table for a seeded estimator.
 *
 * `error(N, trial_seed)` runs one estimation on N samples and returns its
 * error. Trial k uses derive_seed(seed, k) for every N, so rows share trial
 * seeds. Cells may run on several threads without changing the result.
 */
template <class ErrorFn>
std::vector<ConsistencyRow> consistency_sweep(ErrorFn&& error, const std::vector<std::size_t>& sizes,
                                              std::size_t trials, std::uint64_t seed, int threads = 1) {
  if (trials == 0) throw ContractError("consistency sweep needs at least one trial");
  const std::size_t cells = sizes.size() * trials;
  std::vector<double> values(cells);
  auto run = [&](std::size_t i) { values[i] = error(sizes[i / trials], derive_seed(seed, i % trials)); };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), cells);
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<ConsistencyRow> rows;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    ConsistencyRow row;
    row.samples = sizes[s];
    row.errors.assign(values.begin() + static_cast<std::ptrdiff_t>(s * trials),
                      values.begin() + static_cast<std::ptrdiff_t>((s + 1) * trials));
    row.median = quantile(row.errors, 0.5);
    row.q1 = quantile(row.errors, 0.25);
    row.q3 = quantile(row.errors, 0.75);
    rows.push_back(std::move(row));
  }
  return rows;
}

/**
 * @brief Evaluation grid over the operating region of forward regressors.
 *
 * Coordinates are position y(t-1), step y(t-1) - y(t-2) and input u(t-nk-1),
 * each spanning the [lower, upper] quantile range of the reference data.
 * Older lags continue the constant step (outputs) or repeat u(t-nk-1) (inputs).
 */
struct RegressorGrid {
  ModelOrders orders;
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  int points = 15;  ///< per coordinate

  static RegressorGrid from_data(const RegressionData& data, int points = 15, double lower = 0.025,
                                 double upper = 0.975) {
    if (data.direction != ModelDirection::forward) throw ContractError("grid needs forward regressors");
    if (data.orders.na < 2) throw ContractError("grid needs at least two output lags");
    if (data.size() == 0) throw ContractError("grid needs data");
    RegressorGrid g;
    g.orders = data.orders;
    g.points = points;
    const auto n = static_cast<Eigen::Index>(data.size());
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int k = 0; k < 3; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto col = data.regressors.col(j);
        c[static_cast<std::size_t>(j)] =
            k == 0 ? col[0] : k == 1 ? col[0] - col[1] : col[static_cast<Eigen::Index>(data.orders.input_slot())];
      }
      g.lo[k] = quantile(c, lower);
      g.hi[k] = quantile(c, upper);
    }
    return g;
  }

  std::size_t size() const { return static_cast<std::size_t>(points) * points * points; }

  Regressor point(std::size_t index) const {
    Eigen::Vector3d x;
    for (int k = 0; k < 3; ++k) {
      const auto i = static_cast<double>(index % static_cast<std::size_t>(points));
      index /= static_cast<std::size_t>(points);
      x[k] = points > 1 ? lo[k] + (hi[k] - lo[k]) * i / (points - 1) : 0.5 * (lo[k] + hi[k]);
    }
    Regressor phi(static_cast<Eigen::Index>(orders.size()));
    for (int i = 0; i < orders.na; ++i) phi[i] = x[0] - i * x[1];
    for (int j = 0; j < orders.nb; ++j) phi[orders.na + j] = x[2];
    return phi;
  }
};

/// sup over the grid of |y_hat(phi) - truth(phi)|.
template <class Truth>
double function_space_error(const PgnnModel& model, Truth&& truth, const RegressorGrid& grid) {
  if (model.orders != grid.orders) throw ContractError("grid and model orders differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Regressor phi = grid.point(i);
    worst = std::max(worst, std::abs(pgnn_predict(model, phi) - truth(phi)));
  }
  return worst;
}

/**
 * @brief Random one-hidden-layer tanh network of position, used as a parasitic force.
 *
 * Reads entry 0 of a length-2 regressor [y(t-1), y(t-2)], normalized by
 * `stroke`, and is scaled to `rms` newtons over [-stroke, stroke]. A forward
 * PGNN with at least `hidden` tanh units can represent the resulting plant
 * exactly.
 */
inline MlpNetwork make_teacher_network(std::uint64_t seed, int hidden = 16, double stroke = 0.1, double rms = 8.0) {
  if (hidden < 1 || !(stroke > 0.0) || !(rms >= 0.0)) throw ContractError("invalid teacher network settings");
  MlpNetwork net = make_network(2, {0}, {hidden});
  net.half_range[0] = stroke;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(-3.0, 3.0), bias(-2.0, 2.0), out(-1.0, 1.0);
  for (int k = 0; k < hidden; ++k) {
    net.layers[0].weights(k, 0) = weight(rng);
    net.layers[0].bias[k] = bias(rng);
    net.layers[1].weights(0, k) = out(rng);
  }
  double sum_sq = 0.0;
  constexpr int kPoints = 201;
  Regressor phi = Regressor::Zero(2);
  for (int i = 0; i < kPoints; ++i) {
    phi[0] = stroke * (-1.0 + 2.0 * i / (kPoints - 1));
    const double v = nn_forward(net, phi);
    sum_sq += v * v;
  }
  const double current = std::sqrt(sum_sq / kPoints);
  if (current > 0.0) net.layers[1].weights *= rms / current;
  return net;
}

/// Parasitic force g(y1, y2) evaluated by a teacher network.
inline ParasiticForce teacher_force(MlpNetwork net) {
  return [net = std::move(net)](double y1, double y2) {
    Regressor phi(2);
    phi << y1, y2;
    return nn_forward(net, phi);
  };
}

}  // namespace pgff
