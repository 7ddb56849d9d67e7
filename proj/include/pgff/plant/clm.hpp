#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>

#include "pgff/core/physics.hpp"
#include "pgff/core/regressor.hpp"
#include "pgff/error.hpp"

namespace pgff {

/// Unmodelled force acting on the motor: cogging plus asymmetric Coulomb friction.
struct ParasiticSpec {
  double cogging_amplitude = 8.0;   ///< N
  double cogging_period = 0.05;     ///< m
  double friction_asymmetry = 0.1;  ///< fraction of fc added when moving forward
};

struct ClmParameters {
  MotionParameters motion;
  ParasiticSpec parasitic;
  double sample_time = 1e-3;

  void validate() const {
    if (!(motion.mass > 0.0)) throw ContractError("plant mass must be positive");
    if (!(sample_time > 0.0)) throw ContractError("plant sample time must be positive");
    if (parasitic.cogging_amplitude != 0.0 && !(parasitic.cogging_period > 0.0)) {
      throw ContractError("cogging period must be positive when cogging is present");
    }
  }
};

struct NoiseSpec {
  NoiseStructure structure = NoiseStructure::narx;
  double sigma = 1e-6;  ///< m for NARX/NOE, N for NIE
  std::uint64_t seed = 1;

  void validate() const {
    if (!(sigma >= 0.0)) throw ContractError("noise standard deviation must be non-negative");
  }
};

/// Parasitic force as a function of y(t-1) and y(t-2).
using ParasiticForce = std::function<double(double y1, double y2)>;

/**
 * @brief Simulated coreless linear motor.
 *
 *     y(t) = 2 y1 - y2 + Ts^2 / m (-fv dy - fc sign(dy) + u(t-1) + g(y1, y2)),  dy = (y1 - y2) / Ts
 *
 * i.e. the forward physics model plus the parasitic force. The state holds
 * the last two propagated outputs. Under NARX noise the measured (noisy) output
 * is propagated; under NOE the noise-free one; under NIE the noise is added to
 * the force.
 */
class ClmPlant {
 public:
  explicit ClmPlant(const ClmParameters& p) : params_(p) {
    p.validate();
    coeffs_ = PhysicsLinearMotionParams::from_motion(p.motion, p.sample_time);
    const ParasiticSpec g = p.parasitic;
    const double fc = p.motion.coulomb;
    parasitic_ = [g, fc](double y1, double y2) {
      double f = g.friction_asymmetry * fc * (1.0 + sign(y1 - y2)) / 2.0;
      if (g.cogging_amplitude != 0.0) {
        f += g.cogging_amplitude * std::sin(2.0 * std::numbers::pi * y1 / g.cogging_period);
      }
      return f;
    };
  }

  ClmPlant(const ClmParameters& p, ParasiticForce g) : ClmPlant(p) { parasitic_ = std::move(g); }

  /// Puts the motor at rest at `position`.
  void reset(double position) {
    y1_ = position;
    y2_ = position;
  }

  double parasitic_force(double y1, double y2) const { return parasitic_ ? parasitic_(y1, y2) : 0.0; }

  /// Noise-free one-step map from the two previous outputs and the applied force.
  double propagate(double y1, double y2, double force) const {
    const Eigen::Vector3d& c = coeffs_.coefficients;
    const double ts = coeffs_.sample_time;
    const double dy = y1 - y2;
    return 2.0 * y1 - y2 + ts * ts * (-c[0] * dy / ts - c[1] * sign(dy) + c[2] * (force + parasitic_force(y1, y2)));
  }

  /// Applies u(t-1) and noise sample v(t); returns the measured y(t).
  double step(double u, double v, NoiseStructure structure) {
    const bool input_noise = structure == NoiseStructure::nie;
    const double y_true = propagate(y1_, y2_, input_noise ? u + v : u);
    const double measured = input_noise ? y_true : y_true + v;
    y2_ = y1_;
    y1_ = structure == NoiseStructure::narx ? measured : y_true;
    return measured;
  }

  const ClmParameters& parameters() const { return params_; }
  /// Forward physics coefficients of the rigid-body part.
  const PhysicsLinearMotionParams& physics() const { return coeffs_; }
  double last_output() const { return y1_; }

 private:
  ClmParameters params_;
  PhysicsLinearMotionParams coeffs_;
  ParasiticForce parasitic_;
  double y1_ = 0.0;
  double y2_ = 0.0;
};

}  // namespace pgff
