#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "pgff/core/regressor.hpp"
#include "pgff/error.hpp"

namespace pgff {

/// sign with sign(0) = 0.
inline double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

/// Physical parameters of the linear motion model.
struct MotionParameters {
  double mass = 17.5;     ///< kg
  double viscous = 150.0; ///< N s/m
  double coulomb = 30.0;  ///< N
};

/**
 * @brief Parameters of the discretized linear motion model.
 *
 * With backward differences dy = (y1 - y2) / Ts and d2y = (y+ - 2 y0 + y-) / Ts^2,
 * the forward model (velocity taken at t-1) is
 *
 *     y(t) = 2 y1 - y2 + Ts^2 (-c0 dy - c1 sign(dy) + c2 u0),   c = [fv / m, fc / m, 1 / m]
 *
 * where y1 = y(t-1), y2 = y(t-2), u0 = u(t-nk-1). The inverse model on the
 * inverse regressor [y(t+nk+1), y(t+nk), y(t+nk-1), ...] is
 *
 *     u(t) = c0 d2y + c1 dy + c2 sign(dy),   c = [m, fv, fc]
 *
 * with dy = (y0 - y-) / Ts. Both are linear in c. The forward input
 * coefficient c2 is the psi block; the remaining two coefficients form zeta.
 */
struct PhysicsLinearMotionParams {
  ModelDirection direction = ModelDirection::forward;
  Eigen::Vector3d coefficients = Eigen::Vector3d::Zero();
  double sample_time = 1e-3;

  static constexpr int kInputCoefficient = 2;

  static PhysicsLinearMotionParams from_motion(const MotionParameters& p, double ts,
                                               ModelDirection dir = ModelDirection::forward) {
    PhysicsLinearMotionParams out;
    out.direction = dir;
    out.sample_time = ts;
    if (dir == ModelDirection::forward) {
      out.coefficients << p.viscous / p.mass, p.coulomb / p.mass, 1.0 / p.mass;
    } else {
      out.coefficients << p.mass, p.viscous, p.coulomb;
    }
    out.validate();
    return out;
  }

  MotionParameters to_motion() const {
    MotionParameters p;
    if (direction == ModelDirection::forward) {
      p.mass = 1.0 / coefficients[2];
      p.viscous = coefficients[0] * p.mass;
      p.coulomb = coefficients[1] * p.mass;
    } else {
      p.mass = coefficients[0];
      p.viscous = coefficients[1];
      p.coulomb = coefficients[2];
    }
    return p;
  }

  /// Same motion expressed in the other direction.
  PhysicsLinearMotionParams converted(ModelDirection dir) const {
    return dir == direction ? *this : from_motion(to_motion(), sample_time, dir);
  }

  /// Coefficient multiplying the mass-like term.
  double mass_coefficient() const {
    return direction == ModelDirection::forward ? coefficients[2] : coefficients[0];
  }

  /// Derivative of the forward prediction with respect to u(t-nk-1).
  double input_gain() const { return sample_time * sample_time * coefficients[kInputCoefficient]; }

  void validate() const {
    if (!(sample_time > 0.0)) throw ContractError("physics sample time must be positive");
    if (!(mass_coefficient() > 0.0)) {
      throw ContractError("physics mass coefficient must be strictly positive");
    }
  }
};

namespace detail {
inline void require_physics_orders(const ModelOrders& orders, const Regressor& phi) {
  if (orders.na < 2) throw ContractError("linear motion physics needs na >= 2");
  if (static_cast<std::size_t>(phi.size()) != orders.size()) {
    throw ContractError("regressor length does not match model orders");
  }
}
}  // namespace detail

/// Regressor features multiplying the coefficients.
inline Eigen::Vector3d physics_features(const PhysicsLinearMotionParams& params, const Regressor& phi,
                                        const ModelOrders& orders) {
  detail::require_physics_orders(orders, phi);
  const double ts = params.sample_time;
  Eigen::Vector3d f;
  if (params.direction == ModelDirection::forward) {
    const double dy = phi[0] - phi[1];
    f << -ts * dy, -ts * ts * sign(dy), ts * ts * phi[orders.input_slot()];
  } else {
    const double dy = phi[1] - phi[2];
    f << ((phi[0] - phi[1]) - dy) / (ts * ts), dy / ts, sign(dy);
  }
  return f;
}

/// Coefficient-free part of the prediction (2 y1 - y2 for the forward model).
inline double physics_base(const PhysicsLinearMotionParams& params, const Regressor& phi) {
  return params.direction == ModelDirection::forward ? 2.0 * phi[0] - phi[1] : 0.0;
}

inline double physics_predict(const PhysicsLinearMotionParams& params, const Regressor& phi,
                              const ModelOrders& orders) {
  return physics_base(params, phi) + params.coefficients.dot(physics_features(params, phi, orders));
}

/**
 * @brief Solves the forward physics model for the input slot.
 *
 * Returns the u(t-nk-1) value for which physics_predict(phi) equals `target`;
 * the current content of the input slot is ignored.
 */
inline double physics_solve_input(const PhysicsLinearMotionParams& params, double target,
                                  const Regressor& phi, const ModelOrders& orders) {
  if (params.direction != ModelDirection::forward) {
    throw ContractError("physics_solve_input needs a forward-direction model");
  }
  const double gain = params.input_gain();
  if (gain == 0.0) throw InversionError("physics input coefficient is zero");
  const Eigen::Vector3d f = physics_features(params, phi, orders);
  const double rest = physics_base(params, phi) + params.coefficients[0] * f[0] +
                      params.coefficients[1] * f[1];
  return (target - rest) / gain;
}

}  // namespace pgff
