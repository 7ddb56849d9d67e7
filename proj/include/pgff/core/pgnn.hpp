#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pgff/core/mlp.hpp"
#include "pgff/core/physics.hpp"
#include "pgff/core/regressor.hpp"

namespace pgff {

/**
 * @brief Physics-guided neural network: physics model plus an MLP on the same regressor.
 *
 * A forward model predicts y(t) from phi(t); an inverse model predicts u(t)
 * from phi'(t). With `physics_enabled == false` the physics term is dropped
 * and the model is a black-box network.
 */
struct PgnnModel {
  ModelOrders orders;
  PhysicsLinearMotionParams physics;
  bool physics_enabled = true;
  MlpNetwork network;
  std::uint64_t config_hash = 0;  ///< set by the experiment runner to identify the producing config

  ModelDirection direction() const { return physics.direction; }

  std::size_t physics_parameter_count() const { return physics_enabled ? 3 : 0; }
  std::size_t parameter_count() const {
    return physics_parameter_count() + network.parameter_count();
  }

  /// True for the affine-in-input class: forward model whose network ignores u(t-nk-1).
  bool input_excluded() const {
    return direction() == ModelDirection::forward && !network.uses(orders.input_slot());
  }

  void validate() const {
    orders.validate();
    physics.validate();
    network.validate();
    if (network.regressor_size() != orders.size()) {
      throw ContractError("network input mask is inconsistent with the model orders");
    }
  }
};

inline double pgnn_predict(const PgnnModel& model, const Regressor& phi) {
  const double nn = nn_forward(model.network, phi);
  return model.physics_enabled ? physics_predict(model.physics, phi, model.orders) + nn : nn;
}

/// Jacobian row of the prediction with respect to [theta_phy; theta_nn].
inline Eigen::VectorXd pgnn_param_gradient(const PgnnModel& model, const Regressor& phi) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(model.parameter_count()));
  const auto np = static_cast<Eigen::Index>(model.physics_parameter_count());
  if (model.physics_enabled) {
    g.head(3) = physics_features(model.physics, phi, model.orders);
  }
  nn_param_gradient(model.network, phi, g.tail(g.size() - np));
  return g;
}

inline Eigen::VectorXd model_parameters(const PgnnModel& model) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(model.parameter_count()));
  const auto np = static_cast<Eigen::Index>(model.physics_parameter_count());
  if (model.physics_enabled) theta.head(3) = model.physics.coefficients;
  theta.tail(theta.size() - np) = network_parameters(model.network);
  return theta;
}

inline void set_model_parameters(PgnnModel& model, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (static_cast<std::size_t>(theta.size()) != model.parameter_count()) {
    throw ContractError("parameter vector has the wrong size for this model");
  }
  const auto np = static_cast<Eigen::Index>(model.physics_parameter_count());
  if (model.physics_enabled) model.physics.coefficients = theta.head(3);
  set_network_parameters(model.network, theta.tail(theta.size() - np));
}

/// Number of leading output samples in the regressor of the given direction.
inline std::size_t output_block_size(const ModelOrders& orders, ModelDirection dir) {
  return static_cast<std::size_t>(dir == ModelDirection::forward ? orders.na : orders.na + 1);
}

/**
 * @brief Builds a PGNN with an all-zero network (so it equals its physics model).
 *
 * With `difference_outputs` the network reads the output lags as one level and
 * backward differences (see MlpNetwork).
 */
inline PgnnModel make_pgnn(const ModelOrders& orders, const PhysicsLinearMotionParams& physics,
                           const std::vector<int>& hidden, bool exclude_input = false,
                           bool difference_outputs = false) {
  orders.validate();
  PgnnModel m;
  m.orders = orders;
  m.physics = physics;
  const bool exclude = exclude_input && physics.direction == ModelDirection::forward;
  m.network = make_network(orders.size(),
                           exclude ? input_excluded_mask(orders) : full_input_mask(orders), hidden);
  if (difference_outputs) m.network.difference_block = output_block_size(orders, physics.direction);
  m.validate();
  return m;
}

/**
 * @brief Random hidden layers, zero output layer.
 *
 * Hidden weights and biases are uniform in [-s, s] with s = scale / sqrt(fan-in).
 * The zero output layer makes the initial PGNN equal to its physics model.
 */
template <class Rng>
void initialize_network(MlpNetwork& net, Rng& rng, double scale = 1.0) {
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    const double s = scale / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, l.weights.cols())));
    std::uniform_real_distribution<double> dist(-s, s);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = dist(rng);
      l.bias[r] = dist(rng);
    }
  }
  net.layers.back().weights.setZero();
  net.layers.back().bias.setZero();
}

}  // namespace pgff
