#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pgff/error.hpp"

namespace pgff {

/// Jerk-limited point-to-point oscillation between -displacement and +displacement.
struct ReferenceProfile {
  double displacement = 0.1;       ///< m, half the stroke
  double max_velocity = 0.05;      ///< m/s
  double max_acceleration = 4.0;   ///< m/s^2
  double max_jerk = 1000.0;        ///< m/s^3
  double duration = 120.0;         ///< s
  double sample_time = 1e-3;       ///< s
  double dwell = 0.25;             ///< s at rest at each end
};

/**
 * @brief Double-S (seven segment) rest-to-rest motion over a distance.
 *
 * Assumes the velocity bound is reached; `make` rejects bounds for which it
 * is not.
 */
class DoubleSStroke {
 public:
  static DoubleSStroke make(double distance, double v_max, double a_max, double j_max) {
    if (!(distance > 0.0 && v_max > 0.0 && a_max > 0.0 && j_max > 0.0)) {
      throw ContractError("reference bounds must all be positive");
    }
    DoubleSStroke s;
    s.h_ = distance;
    s.v_ = v_max;
    s.j_ = j_max;
    if (v_max * j_max >= a_max * a_max) {
      s.tj_ = a_max / j_max;
      s.ta_ = s.tj_ + v_max / a_max;
    } else {
      s.tj_ = std::sqrt(v_max / j_max);
      s.ta_ = 2.0 * s.tj_;
    }
    s.alim_ = j_max * s.tj_;
    s.tv_ = distance / v_max - s.ta_;
    if (s.tv_ < 0.0) {
      throw ContractError("maximum velocity is not reachable within the displacement span");
    }
    return s;
  }

  double duration() const { return 2.0 * ta_ + tv_; }
  double distance() const { return h_; }

  /// Position at time t in [0, duration()]; clamps outside.
  double position(double t) const {
    const double total = duration();
    if (t <= 0.0) return 0.0;
    if (t >= total) return h_;
    if (t > ta_ + tv_) return h_ - accel_part(total - t);
    if (t >= ta_) return v_ * ta_ / 2.0 + v_ * (t - ta_);
    return accel_part(t);
  }

 private:
  double accel_part(double t) const {
    if (t < tj_) return j_ * t * t * t / 6.0;
    if (t < ta_ - tj_) return alim_ / 6.0 * (3.0 * t * t - 3.0 * tj_ * t + tj_ * tj_);
    const double s = ta_ - t;
    return v_ * ta_ / 2.0 - v_ * s + j_ * s * s * s / 6.0;
  }

  double h_ = 0, v_ = 0, j_ = 0, tj_ = 0, ta_ = 0, tv_ = 0, alim_ = 0;
};

/**
 * @brief Samples the oscillating reference r(k Ts), k = 0 .. floor(duration / Ts) - 1.
 *
 * Each cycle: dwell at -d, stroke to +d, dwell at +d, stroke back. The
 * backward stroke is the exact negation of the forward stroke.
 */
inline std::vector<double> generate_reference(const ReferenceProfile& p) {
  if (!(p.sample_time > 0.0) || p.duration < 0.0 || p.dwell < 0.0) {
    throw ContractError("reference needs Ts > 0, duration >= 0 and dwell >= 0");
  }
  const auto n = static_cast<std::size_t>(std::floor(p.duration / p.sample_time + 1e-9));
  if (n == 0) return {};
  const auto stroke =
      DoubleSStroke::make(2.0 * p.displacement, p.max_velocity, p.max_acceleration, p.max_jerk);
  const double half_cycle = p.dwell + stroke.duration();
  const double d = p.displacement;
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * p.sample_time;
    const double cycles = std::floor(t / half_cycle);
    const double local = t - cycles * half_cycle;
    const double q = local < p.dwell ? 0.0 : stroke.position(local - p.dwell);
    const double up = -d + q;
    r[k] = static_cast<long long>(cycles) % 2 == 0 ? up : -up;
  }
  return r;
}

}  // namespace pgff
