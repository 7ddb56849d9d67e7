#pragma once

#include <cstddef>
#include <vector>

#include "pgff/error.hpp"

namespace pgff {

/**
 * @brief Linear discrete controller C(q^-1) = num(q^-1) / den(q^-1).
 *
 * u(t) = sum_i num[i] e(t-i) - sum_{j>=1} den[j] u(t-j), den[0] = 1.
 */
class LinearDiscreteController {
 public:
  LinearDiscreteController() = default;
  LinearDiscreteController(std::vector<double> num, std::vector<double> den)
      : num_(std::move(num)), den_(std::move(den)) {
    if (num_.empty() || den_.empty() || den_[0] != 1.0) {
      throw ContractError("controller denominator must be monic and coefficients non-empty");
    }
    reset();
  }

  void reset() {
    e_.assign(num_.size(), 0.0);
    u_.assign(den_.size(), 0.0);
  }

  double step(double error) {
    for (std::size_t i = e_.size() - 1; i > 0; --i) e_[i] = e_[i - 1];
    e_[0] = error;
    double u = 0.0;
    for (std::size_t i = 0; i < num_.size(); ++i) u += num_[i] * e_[i];
    for (std::size_t j = 1; j < den_.size(); ++j) u -= den_[j] * u_[j - 1];
    for (std::size_t j = u_.size() - 1; j > 0; --j) u_[j] = u_[j - 1];
    u_[0] = u;
    return u;
  }

  const std::vector<double>& numerator() const { return num_; }
  const std::vector<double>& denominator() const { return den_; }

 private:
  std::vector<double> num_{0.0};
  std::vector<double> den_{1.0};
  std::vector<double> e_{0.0};
  std::vector<double> u_{0.0};
};

/// Parallel PID with first-order derivative filter.
struct PidGains {
  double kp = 9.2e4;                    ///< N/m
  double ki = 2.3e6;                    ///< N/(m s)
  double kd = 2.2e3;                    ///< N s/m
  double derivative_time_constant = 2.65e-3;  ///< s
};

/**
 * @brief Backward-Euler discretization of kp + ki/s + kd s / (tau s + 1).
 *
 * Defaults give roughly 20 Hz crossover on the default 17.5 kg motor: lead
 * zero at a third of crossover, filter pole at three times crossover,
 * integrator corner at a fifth.
 */
inline LinearDiscreteController make_pid(const PidGains& g, double ts) {
  if (!(ts > 0.0) || g.derivative_time_constant < 0.0) {
    throw ContractError("PID needs Ts > 0 and a non-negative derivative filter constant");
  }
  const double alpha = g.derivative_time_constant / (g.derivative_time_constant + ts);
  const double kd = g.kd / (g.derivative_time_constant + ts);
  // Common denominator (1 - q^-1)(1 - alpha q^-1).
  const std::vector<double> den{1.0, -(1.0 + alpha), alpha};
  std::vector<double> num(3, 0.0);
  num[0] = g.kp + g.ki * ts + kd;
  num[1] = -g.kp * (1.0 + alpha) - g.ki * ts * alpha - 2.0 * kd;
  num[2] = g.kp * alpha + kd;
  return {num, den};
}

}  // namespace pgff
