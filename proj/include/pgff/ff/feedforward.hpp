#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgff/core/pgnn.hpp"
#include "pgff/error.hpp"

namespace pgff {

/**
 * @brief Reference preview and past feedforward outputs of one controller.
 *
 * At time t the controller may read r up to t + nk + 1; reading further ahead
 * throws. Indices before the start hold r(0), indices past the end hold the
 * final setpoint.
 */
class FeedforwardState {
 public:
  FeedforwardState(const ModelOrders& orders, std::span<const double> reference)
      : orders_(orders), reference_(reference),
        past_(static_cast<std::size_t>(std::max(0, orders.nb - 1)), 0.0) {
    orders.validate();
  }

  std::size_t time() const { return t_; }
  const ModelOrders& orders() const { return orders_; }

  /// Lead sample t + nk + 1 that the current feedforward must produce.
  std::ptrdiff_t lead() const { return static_cast<std::ptrdiff_t>(t_) + orders_.nk + 1; }

  double reference(std::ptrdiff_t index) const {
    if (index > lead()) {
      throw ContractError("feedforward read r(" + std::to_string(index) +
                          ") beyond its preview at t=" + std::to_string(t_));
    }
    if (reference_.empty()) return 0.0;
    if (index < 0) return reference_.front();
    if (static_cast<std::size_t>(index) >= reference_.size()) return reference_.back();
    return reference_[static_cast<std::size_t>(index)];
  }

  /// u_ff(t - j) for j >= 1; zero before the start.
  double past_input(int j) const {
    return j >= 1 && static_cast<std::size_t>(j) <= past_.size() ? past_[static_cast<std::size_t>(j - 1)] : 0.0;
  }

  /// phi_ff(t+nk+1) = [r(t+nk) .. r(t+nk+1-na), candidate, u_ff(t-1) .. u_ff(t-nb+1)].
  Regressor forward_regressor(double candidate) const {
    Regressor phi(static_cast<Eigen::Index>(orders_.size()));
    for (int i = 0; i < orders_.na; ++i) phi[i] = reference(lead() - 1 - i);
    phi[orders_.na] = candidate;
    for (int j = 1; j < orders_.nb; ++j) phi[orders_.na + j] = past_input(j);
    return phi;
  }

  /// phi'_ff(t) = [r(t+nk+1) .. r(t+nk+1-na), u_ff(t-1) .. u_ff(t-nb+1)].
  Regressor inverse_regressor() const {
    Regressor phi(static_cast<Eigen::Index>(orders_.size()));
    for (int i = 0; i <= orders_.na; ++i) phi[i] = reference(lead() - i);
    for (int j = 1; j < orders_.nb; ++j) phi[orders_.na + j] = past_input(j);
    return phi;
  }

  /// Records u_ff(t) and advances to t + 1.
  void commit(double u) {
    if (!past_.empty()) {
      std::rotate(past_.rbegin(), past_.rbegin() + 1, past_.rend());
      past_[0] = u;
    }
    ++t_;
  }

 private:
  ModelOrders orders_;
  std::span<const double> reference_;
  std::vector<double> past_;
  std::size_t t_ = 0;
};

struct InversionConfig {
  int iterations = 5;              ///< Newton budget k; 0 returns the physics initialization
  double derivative_floor = 1e-9;  ///< |V_R'| below this skips the update
  double lower = -2000.0;          ///< N
  double upper = 2000.0;           ///< N
  double tolerance = 1e-13;        ///< |V_R| counted as converged (diagnostics only)

  void validate() const {
    if (iterations < 0) throw ContractError("iteration budget must be non-negative");
    if (!(derivative_floor > 0.0)) throw ContractError("derivative floor must be positive");
    if (!(lower < upper)) throw ContractError("saturation bounds must be ordered");
  }
};

struct FeedforwardDiagnostics {
  int iterations = 0;      ///< Newton updates performed
  int converged_at = -1;   ///< first iterate with |V_R| <= tolerance, -1 if none
  int best_iterate = 0;
  double residual = std::numeric_limits<double>::quiet_NaN();  ///< |V_R| of the returned input
  int floor_hits = 0;
  bool saturated = false;
};

/// Physics-model feedforward: the anchor physics solved exactly for u_ff(t).
inline double physics_feedforward(const PhysicsLinearMotionParams& physics, const FeedforwardState& state) {
  return physics_solve_input(physics, state.reference(state.lead()), state.forward_regressor(0.0),
                             state.orders());
}

/// Inverse-direction PGNN evaluated on phi'_ff(t).
inline double direct_inverse_feedforward(const PgnnModel& inverse_model, const FeedforwardState& state) {
  if (inverse_model.direction() != ModelDirection::inverse) {
    throw ContractError("direct inverse feedforward needs an inverse-direction model");
  }
  return pgnn_predict(inverse_model, state.inverse_regressor());
}

/// V_R(u) = r(t+nk+1) - y_hat(phi_ff(t+nk+1)) and its derivative in u.
inline std::pair<double, double> residual_vr(const PgnnModel& model, double u, const FeedforwardState& state) {
  if (model.direction() != ModelDirection::forward) {
    throw ContractError("residual V_R needs a forward-direction model");
  }
  const Regressor phi = state.forward_regressor(u);
  const double vr = state.reference(state.lead()) - pgnn_predict(model, phi);
  const std::size_t slot = state.orders().input_slot();
  double dvr = -nn_input_gradient(model.network, phi, slot);
  if (model.physics_enabled) {
    dvr -= model.physics.input_gain();
  }
  return {vr, dvr};
}

/**
 * @brief Newton-Raphson search for u_ff(t) on a forward PGNN.
 *
 * Starts at the physics feedforward of `anchor`, applies u <- u - V_R / V_R'
 * for the configured number of iterations (a step is skipped while
 * |V_R'| < derivative_floor) and returns the iterate with the smallest |V_R|,
 * saturated to the bounds.
 */
inline double newton_feedforward(const PgnnModel& model, const PhysicsLinearMotionParams& anchor,
                                 const FeedforwardState& state, const InversionConfig& config,
                                 FeedforwardDiagnostics* diag = nullptr) {
  config.validate();
  FeedforwardDiagnostics d;
  double u = physics_feedforward(anchor, state);
  auto [vr, dvr] = residual_vr(model, u, state);
  double best_u = u;
  double best_abs = std::abs(vr);
  if (best_abs <= config.tolerance) d.converged_at = 0;
  for (int i = 1; i <= config.iterations; ++i) {
    if (std::abs(dvr) < config.derivative_floor) {
      ++d.floor_hits;
    } else {
      u -= vr / dvr;
    }
    std::tie(vr, dvr) = residual_vr(model, u, state);
    ++d.iterations;
    if (std::abs(vr) < best_abs) {
      best_abs = std::abs(vr);
      best_u = u;
      d.best_iterate = i;
    }
    if (d.converged_at < 0 && std::abs(vr) <= config.tolerance) d.converged_at = i;
  }
  d.residual = best_abs;
  const double clipped = std::clamp(best_u, config.lower, config.upper);
  d.saturated = clipped != best_u;
  if (diag != nullptr) *diag = d;
  return clipped;
}

/**
 * @brief Closed-form inverse of an affine-in-input PGNN.
 *
 * The network term Delta_f is evaluated on phi_ff(t+nk+1) (it ignores the
 * input slot), subtracted from r(t+nk+1), and the physics model is solved for
 * the input.
 */
inline double analytic_feedforward(const PgnnModel& model, const FeedforwardState& state) {
  if (!model.input_excluded() || !model.physics_enabled) {
    throw ContractError("analytic feedforward needs a forward PGNN whose network excludes u(t-nk-1)");
  }
  const Regressor phi = state.forward_regressor(0.0);
  const double delta_f = nn_forward(model.network, phi);
  return physics_solve_input(model.physics, state.reference(state.lead()) - delta_f, phi, state.orders());
}

enum class FeedforwardMethod { none, physics, direct_inverse, newton, analytic };

inline const char* to_string(FeedforwardMethod m) {
  switch (m) {
    case FeedforwardMethod::none: return "none";
    case FeedforwardMethod::physics: return "physics";
    case FeedforwardMethod::direct_inverse: return "direct_inverse";
    case FeedforwardMethod::newton: return "newton";
    case FeedforwardMethod::analytic: return "analytic";
  }
  return "?";
}

inline FeedforwardMethod feedforward_method_from_string(const std::string& s) {
  for (auto m : {FeedforwardMethod::none, FeedforwardMethod::physics, FeedforwardMethod::direct_inverse,
                 FeedforwardMethod::newton, FeedforwardMethod::analytic}) {
    if (s == to_string(m)) return m;
  }
  throw ContractError("unknown feedforward method '" + s + "'");
}

/// What a controller is built from; shared across sweep cells.
struct FeedforwardSpec {
  FeedforwardMethod method = FeedforwardMethod::none;
  ModelOrders orders;
  PhysicsLinearMotionParams anchor;           ///< physics and Newton initialization
  std::shared_ptr<const PgnnModel> model;     ///< direct inverse, Newton or analytic model
  InversionConfig inversion;
  std::string label;                          ///< report name; defaults to the method name

  std::string name() const { return label.empty() ? to_string(method) : label; }
};

/// Stateful feedforward controller. Output is always inside the saturation bounds.
class FeedforwardController {
 public:
  FeedforwardController(FeedforwardSpec spec, std::span<const double> reference)
      : spec_(std::move(spec)), state_(spec_.orders, reference) {
    spec_.inversion.validate();
    const bool needs_model = spec_.method == FeedforwardMethod::direct_inverse ||
                             spec_.method == FeedforwardMethod::newton ||
                             spec_.method == FeedforwardMethod::analytic;
    if (needs_model) {
      if (!spec_.model) throw ContractError(spec_.name() + " feedforward needs a model");
      if (spec_.model->orders != spec_.orders) throw ContractError("feedforward model orders differ");
      if (spec_.method == FeedforwardMethod::direct_inverse &&
          spec_.model->direction() != ModelDirection::inverse) {
        throw ContractError("direct inverse feedforward needs an inverse-direction model");
      }
      if (spec_.method == FeedforwardMethod::analytic && !spec_.model->input_excluded()) {
        throw ContractError("analytic feedforward needs an input-excluded forward model");
      }
      if (spec_.method == FeedforwardMethod::newton && spec_.model->direction() != ModelDirection::forward) {
        throw ContractError("Newton feedforward needs a forward-direction model");
      }
    }
  }

  /// Computes u_ff(t), advances the state and returns the value.
  double next(FeedforwardDiagnostics* diag = nullptr) {
    FeedforwardDiagnostics d;
    double u = 0.0;
    switch (spec_.method) {
      case FeedforwardMethod::none: break;
      case FeedforwardMethod::physics: u = physics_feedforward(spec_.anchor, state_); break;
      case FeedforwardMethod::direct_inverse: u = direct_inverse_feedforward(*spec_.model, state_); break;
      case FeedforwardMethod::newton: u = newton_feedforward(*spec_.model, spec_.anchor, state_, spec_.inversion, &d); break;
      case FeedforwardMethod::analytic: u = analytic_feedforward(*spec_.model, state_); break;
    }
    const double clipped = std::clamp(u, spec_.inversion.lower, spec_.inversion.upper);
    d.saturated = d.saturated || clipped != u;
    state_.commit(clipped);
    if (diag != nullptr) *diag = d;
    return clipped;
  }

  const FeedforwardSpec& spec() const { return spec_; }
  const FeedforwardState& state() const { return state_; }

 private:
  FeedforwardSpec spec_;
  FeedforwardState state_;
};

}  // namespace pgff
