#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pgff/core/regressor.hpp"
#include "pgff/error.hpp"

namespace pgff {

/// Signals available to identification: reference, input, excitation, output.
struct Measurements {
  std::vector<double> r;
  std::vector<double> u;
  std::vector<double> du;
  std::vector<double> y;
  double sample_time = 1e-3;

  std::size_t size() const { return y.size(); }

  void validate() const {
    if (r.size() != y.size() || u.size() != y.size() || du.size() != y.size()) {
      throw ContractError("measurement arrays differ in length");
    }
  }
};

/**
 * @brief Closed-loop record Z^N.
 *
 * The noise realization lives next to the measurements, not inside them;
 * identification code only ever receives `Measurements`.
 */
struct DataSet {
  Measurements data;
  std::vector<double> noise;  ///< v(t), for oracle checks only
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return data.size(); }
};

/// Regressor/target pairs, one regressor per column.
struct RegressionData {
  ModelOrders orders;
  ModelDirection direction = ModelDirection::forward;
  Eigen::MatrixXd regressors;
  Eigen::VectorXd targets;
  std::vector<std::size_t> times;  ///< target time index per pair

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
};

/**
 * @brief Builds forward (phi(t), y(t)) or inverse (phi'(t), u(t)) pairs.
 *
 * The first max(na, nb + nk) forward samples are dropped. Inverse pairs are
 * indexed by the input time t and cover the same output times t + nk + 1, so
 * the last nk + 1 inputs are dropped. Both directions yield N - warmup pairs.
 */
inline RegressionData build_dataset(const Measurements& m, const ModelOrders& orders,
                                    ModelDirection direction) {
  m.validate();
  orders.validate();
  const std::size_t n = m.size();
  const std::size_t warm = orders.warmup();
  if (n <= warm) throw ContractError("record too short for the model orders");
  RegressionData out;
  out.orders = orders;
  out.direction = direction;
  const std::size_t pairs = n - warm;
  out.regressors.resize(static_cast<Eigen::Index>(orders.size()), static_cast<Eigen::Index>(pairs));
  out.targets.resize(static_cast<Eigen::Index>(pairs));
  out.times.resize(pairs);
  const auto shift = static_cast<std::size_t>(orders.nk + 1);
  for (std::size_t k = 0; k < pairs; ++k) {
    const std::size_t t_out = warm + k;
    const auto col = static_cast<Eigen::Index>(k);
    if (direction == ModelDirection::forward) {
      out.regressors.col(col) = build_regressor(m.y, m.u, t_out, orders);
      out.targets[col] = m.y[t_out];
      out.times[k] = t_out;
    } else {
      const std::size_t t_in = t_out - shift;
      out.regressors.col(col) = build_inverse_regressor(m.y, m.u, t_in, orders);
      out.targets[col] = m.u[t_in];
      out.times[k] = t_in;
    }
  }
  return out;
}

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Writes columns t, r, u, du, y; an optional leading comment line carries the config hash.
inline void write_dataset_csv(const Measurements& m, const std::string& path,
                              const std::string& config_hash = {}) {
  m.validate();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  if (!config_hash.empty()) f << "# config_hash=" << config_hash << '\n';
  f << "t,r,u,du,y\n";
  for (std::size_t k = 0; k < m.size(); ++k) {
    f << detail::format_double(static_cast<double>(k) * m.sample_time) << ','
      << detail::format_double(m.r[k]) << ',' << detail::format_double(m.u[k]) << ','
      << detail::format_double(m.du[k]) << ',' << detail::format_double(m.y[k]) << '\n';
  }
}

/// Reads the CSV written by write_dataset_csv. Ts comes from the t column.
inline Measurements read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open dataset '" + path + "'");
  Measurements m;
  std::string line;
  bool header = false;
  std::vector<double> t;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "t,r,u,du,y") throw ConfigError("unexpected dataset header '" + line + "'", lineno);
      header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string cell;
    double v[5];
    for (int c = 0; c < 5; ++c) {
      if (!std::getline(ss, cell, ',')) throw ConfigError("dataset row has fewer than 5 columns", lineno);
      try {
        v[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("non-numeric dataset cell '" + cell + "'", lineno);
      }
    }
    t.push_back(v[0]);
    m.r.push_back(v[1]);
    m.u.push_back(v[2]);
    m.du.push_back(v[3]);
    m.y.push_back(v[4]);
  }
  if (!header) throw ConfigError("dataset '" + path + "' has no header");
  if (t.size() >= 2) m.sample_time = t[1] - t[0];
  return m;
}

}  // namespace pgff
