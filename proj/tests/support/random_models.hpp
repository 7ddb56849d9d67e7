#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <pgff/core/pgnn.hpp>

namespace pgff::testing {

/// PGNN with random orders, random physics, random weights and random normalization.
inline PgnnModel random_pgnn(std::mt19937_64& rng, ModelDirection dir, bool exclude_input = false) {
  std::uniform_int_distribution<int> na_d(2, 3), nb_d(1, 3), nk_d(0, 2), width_d(2, 6), depth_d(1, 2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(0.5, 2.0);
  ModelOrders orders{na_d(rng), nb_d(rng), nk_d(rng)};
  PhysicsLinearMotionParams phy;
  phy.direction = dir;
  phy.sample_time = 1e-3;
  phy.coefficients << pos(rng) * 8.0, pos(rng) * 2.0, pos(rng) * 0.05;
  std::vector<int> hidden(static_cast<std::size_t>(depth_d(rng)));
  for (auto& h : hidden) h = width_d(rng);
  PgnnModel m = make_pgnn(orders, phy, hidden, exclude_input, std::bernoulli_distribution(0.5)(rng));
  for (auto& l : m.network.layers) {
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = unit(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.5 * unit(rng);
  }
  for (Eigen::Index i = 0; i < m.network.center.size(); ++i) {
    m.network.center[i] = 0.1 * unit(rng);
    m.network.half_range[i] = pos(rng);
  }
  return m;
}

inline Regressor random_regressor(std::mt19937_64& rng, const ModelOrders& orders) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Regressor phi(static_cast<Eigen::Index>(orders.size()));
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] = unit(rng);
  return phi;
}

/// Central difference of f at x along coordinate i.
template <class F>
double central_difference(F&& f, Eigen::VectorXd x, Eigen::Index i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline bool close_relative(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), abs_floor});
}

}  // namespace pgff::testing
