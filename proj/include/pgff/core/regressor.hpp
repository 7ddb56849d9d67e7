#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "pgff/error.hpp"

namespace pgff {

/// Where the white noise enters the loop.
enum class NoiseStructure { narx, noe, nie };

/// Whether a model predicts the output (forward) or the input (inverse).
enum class ModelDirection { forward, inverse };

inline const char* to_string(NoiseStructure s) {
  switch (s) {
    case NoiseStructure::narx: return "narx";
    case NoiseStructure::noe: return "noe";
    case NoiseStructure::nie: return "nie";
  }
  return "?";
}

inline NoiseStructure noise_structure_from_string(const std::string& s) {
  if (s == "narx") return NoiseStructure::narx;
  if (s == "noe") return NoiseStructure::noe;
  if (s == "nie") return NoiseStructure::nie;
  throw ContractError("unknown noise structure '" + s + "'");
}

/// Lag structure of a NARX-type model.
struct ModelOrders {
  int na = 2;  ///< output lags
  int nb = 1;  ///< input lags
  int nk = 0;  ///< pure input delay in samples

  void validate() const {
    if (na < 1 || nb < 1 || nk < 0) {
      throw ContractError("model orders require na >= 1, nb >= 1, nk >= 0");
    }
  }

  /// Length of both the forward and the inverse regressor.
  std::size_t size() const { return static_cast<std::size_t>(na + nb); }

  /// Number of leading samples without a complete forward regressor.
  std::size_t warmup() const { return static_cast<std::size_t>(std::max(na, nb + nk)); }

  /// Regressor slot holding the most recent input u(t-nk-1).
  std::size_t input_slot() const { return static_cast<std::size_t>(na); }

  friend bool operator==(const ModelOrders&, const ModelOrders&) = default;
};

/// Stacked lagged signals, outputs first then inputs.
using Regressor = Eigen::VectorXd;

/**
 * @brief Forward regressor phi(t) = [y(t-1) .. y(t-na), u(t-nk-1) .. u(t-nk-nb)].
 *
 * The caller picks which output history to pass: measured outputs for NARX and
 * NIE data, free-run model outputs for the NOE predictor.
 */
inline Regressor build_regressor(std::span<const double> y, std::span<const double> u,
                                 std::size_t t, const ModelOrders& orders) {
  orders.validate();
  const auto na = static_cast<std::size_t>(orders.na);
  const auto nb = static_cast<std::size_t>(orders.nb);
  const auto nk = static_cast<std::size_t>(orders.nk);
  if (t < na || t < nk + nb) {
    throw ColdStartError("regressor at t=" + std::to_string(t) + " needs " +
                         std::to_string(orders.warmup()) + " samples of history");
  }
  if (t > y.size() || t - nk > u.size()) {
    throw ContractError("regressor time index beyond the recorded histories");
  }
  Regressor phi(na + nb);
  for (std::size_t i = 0; i < na; ++i) phi[i] = y[t - 1 - i];
  for (std::size_t j = 0; j < nb; ++j) phi[na + j] = u[t - nk - 1 - j];
  return phi;
}

/**
 * @brief Inverse regressor phi'(t) = [y(t+nk+1) .. y(t+nk+1-na), u(t-1) .. u(t-nb+1)].
 *
 * Holds na+1 output samples (the output block of the forward relation shifted
 * nk+1 samples ahead) and nb-1 past inputs, so it has the same length as the
 * forward regressor. Passing the reference and past feedforward values gives
 * phi'_ff.
 */
inline Regressor build_inverse_regressor(std::span<const double> y, std::span<const double> u,
                                         std::size_t t, const ModelOrders& orders) {
  orders.validate();
  const auto na = static_cast<std::size_t>(orders.na);
  const auto nb = static_cast<std::size_t>(orders.nb);
  const auto nk = static_cast<std::size_t>(orders.nk);
  const std::size_t lead = t + nk + 1;
  if (lead >= y.size()) {
    throw ColdStartError("inverse regressor at t=" + std::to_string(t) +
                         " needs preview up to sample " + std::to_string(lead));
  }
  if (lead < na || t + 1 < nb) {
    throw ColdStartError("inverse regressor at t=" + std::to_string(t) +
                         " needs more history");
  }
  if (nb > 1 && t - 1 >= u.size()) {
    throw ContractError("inverse regressor time index beyond the input history");
  }
  Regressor phi(na + nb);
  for (std::size_t i = 0; i <= na; ++i) phi[i] = y[lead - i];
  for (std::size_t j = 1; j < nb; ++j) phi[na + j] = u[t - j];
  return phi;
}

}  // namespace pgff
