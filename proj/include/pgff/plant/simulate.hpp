#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "pgff/plant/clm.hpp"
#include "pgff/plant/controller.hpp"
#include "pgff/plant/dataset.hpp"

namespace pgff {

struct ClosedLoopOptions {
  double excitation_sigma = 50.0;     ///< N, white excitation Delta u
  std::uint64_t excitation_seed = 2;
  double divergence_bound = 0.0;      ///< m; 0 selects 10 x max|r| (1 m for a zero reference)
};

/// Feedforward input u_ff(t), queried once per sample in time order.
using FeedforwardFn = std::function<double(std::size_t t)>;

inline nlohmann::json plant_metadata(const ClmParameters& p) {
  return {{"mass", p.motion.mass},
          {"viscous", p.motion.viscous},
          {"coulomb", p.motion.coulomb},
          {"cogging_amplitude", p.parasitic.cogging_amplitude},
          {"cogging_period", p.parasitic.cogging_period},
          {"friction_asymmetry", p.parasitic.friction_asymmetry},
          {"sample_time", p.sample_time}};
}

/**
 * @brief Runs u(t) = C(q^-1)(r(t) - y(t)) + Delta u(t) + u_ff(t) against the motor.
 *
 * The motor starts at rest at r(0) and y(0) = r(0) is noise free. For t >= 1,
 * y(t) is the motor response to u(t-1) with noise sample v(t).
 *
 * @throws DivergenceError when |y| exceeds the divergence bound.
 */
inline DataSet simulate_closed_loop(ClmPlant plant, LinearDiscreteController controller,
                                    std::span<const double> reference,
                                    const ClosedLoopOptions& options, const NoiseSpec& noise,
                                    const FeedforwardFn& feedforward = {}) {
  noise.validate();
  if (!(options.excitation_sigma >= 0.0)) throw ContractError("excitation sigma must be >= 0");
  const std::size_t n = reference.size();
  DataSet ds;
  auto& m = ds.data;
  m.sample_time = plant.parameters().sample_time;
  m.r.assign(reference.begin(), reference.end());
  m.u.assign(n, 0.0);
  m.du.assign(n, 0.0);
  m.y.assign(n, 0.0);
  ds.noise.assign(n, 0.0);

  double bound = options.divergence_bound;
  if (bound <= 0.0) {
    double rmax = 0.0;
    for (double r : reference) rmax = std::max(rmax, std::abs(r));
    bound = rmax > 0.0 ? 10.0 * rmax : 1.0;
  }

  std::mt19937_64 noise_rng(noise.seed);
  std::mt19937_64 excitation_rng(options.excitation_seed);
  std::normal_distribution<double> noise_normal(0.0, 1.0);
  std::normal_distribution<double> excitation_normal(0.0, 1.0);

  if (n > 0) {
    plant.reset(reference[0]);
    m.y[0] = reference[0];
  }
  controller.reset();
  for (std::size_t t = 0; t < n; ++t) {
    const double e = m.r[t] - m.y[t];
    const double du = options.excitation_sigma > 0.0 ? options.excitation_sigma * excitation_normal(excitation_rng) : 0.0;
    const double ff = feedforward ? feedforward(t) : 0.0;
    m.du[t] = du;
    m.u[t] = controller.step(e) + du + ff;
    if (t + 1 < n) {
      const double v = noise.sigma > 0.0 ? noise.sigma * noise_normal(noise_rng) : 0.0;
      ds.noise[t + 1] = v;
      m.y[t + 1] = plant.step(m.u[t], v, noise.structure);
      if (!std::isfinite(m.y[t + 1]) || std::abs(m.y[t + 1]) > bound) {
        throw DivergenceError("closed loop diverged at sample " + std::to_string(t + 1) +
                              ": |y| exceeds " + detail::format_double(bound) + " m");
      }
    }
  }

  ds.metadata = {{"plant", plant_metadata(plant.parameters())},
                 {"controller",
                  {{"numerator", controller.numerator()}, {"denominator", controller.denominator()}}},
                 {"noise",
                  {{"structure", to_string(noise.structure)}, {"sigma", noise.sigma}, {"seed", noise.seed}}},
                 {"excitation",
                  {{"sigma", options.excitation_sigma}, {"seed", options.excitation_seed}}},
                 {"sample_time", m.sample_time},
                 {"samples", n}};
  return ds;
}

}  // namespace pgff
