#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pgff/core/regressor.hpp"
#include "pgff/core/seed.hpp"
#include "pgff/error.hpp"
#include "pgff/ident/least_squares.hpp"
#include "pgff/plant/dataset.hpp"

namespace pgff {

/**
 * @brief Linear ARX system with equation-error noise.
 *
 *     y(t) = sum_i a_i y(t-i) + sum_j b_j u(t-nk-1-j) + v(t),   i = 1..na, j = 0..nb-1
 *
 * Its inverse on phi'(t) = [y(t+nk+1) .. y(t+nk+1-na), u(t-1) .. u(t-nb+1)] is
 *
 *     u(t) = theta0'^T phi'(t) - v(t+nk+1) / psi0,   psi0 = b_0.
 */
struct LinearArxSystem {
  std::vector<double> a{1.5, -0.7};
  std::vector<double> b{1.0, 0.5};
  int nk = 0;

  ModelOrders orders() const {
    return {static_cast<int>(a.size()), static_cast<int>(b.size()), nk};
  }

  double psi() const { return b.front(); }

  /// theta0 = [a_1 .. a_na, b_0 .. b_{nb-1}], matching the forward regressor.
  Eigen::VectorXd forward_parameters() const {
    Eigen::VectorXd th(static_cast<Eigen::Index>(a.size() + b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) th[static_cast<Eigen::Index>(i)] = a[i];
    for (std::size_t j = 0; j < b.size(); ++j) th[static_cast<Eigen::Index>(a.size() + j)] = b[j];
    return th;
  }

  /// theta0' = [1, -a_1, .., -a_na, -b_1, .., -b_{nb-1}] / b_0, matching the inverse regressor.
  Eigen::VectorXd inverse_parameters() const {
    Eigen::VectorXd th(static_cast<Eigen::Index>(a.size() + b.size()));
    th[0] = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) th[static_cast<Eigen::Index>(i + 1)] = -a[i];
    for (std::size_t j = 1; j < b.size(); ++j) th[static_cast<Eigen::Index>(a.size() + j)] = -b[j];
    return th / psi();
  }

  void validate() const {
    if (a.empty() || b.empty() || nk < 0) throw ContractError("ARX system needs na >= 1, nb >= 1, nk >= 0");
    if (psi() == 0.0) throw InversionError("leading input coefficient b_0 is zero");
  }
};

/// Roots of c[0] z^n + c[1] z^(n-1) + ... + c[n] via the companion matrix.
inline std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& c) {
  if (c.empty() || c.front() == 0.0) throw ContractError("polynomial needs a nonzero leading coefficient");
  const auto n = static_cast<Eigen::Index>(c.size() - 1);
  if (n == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) companion(0, j) = -c[static_cast<std::size_t>(j + 1)] / c.front();
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline double max_root_magnitude(const std::vector<double>& c) {
  double m = 0.0;
  for (const auto& r : polynomial_roots(c)) m = std::max(m, std::abs(r));
  return m;
}

/// Poles z^na - a_1 z^(na-1) - ... - a_na strictly inside the unit circle.
inline bool forward_stable(const LinearArxSystem& s) {
  std::vector<double> c{1.0};
  for (double ai : s.a) c.push_back(-ai);
  return max_root_magnitude(c) < 1.0;
}

/// Zeros b_0 z^(nb-1) + ... + b_{nb-1} strictly inside the unit circle.
inline bool inverse_stable(const LinearArxSystem& s) {
  s.validate();
  return max_root_magnitude(s.b) < 1.0;
}

/// Sum of squared impulse-response samples of num(q^-1) / A(q^-1), truncated once it has decayed.
inline double impulse_energy(const LinearArxSystem& s, const std::vector<double>& num) {
  std::vector<double> h;
  double energy = 0.0;
  for (std::size_t t = 0; t < 1000000; ++t) {
    double v = t < num.size() ? num[t] : 0.0;
    for (std::size_t i = 0; i < s.a.size() && i < t; ++i) v += s.a[i] * h[t - 1 - i];
    h.push_back(v);
    energy += v * v;
    if (t > 100 + num.size() && std::abs(v) < 1e-14 * std::sqrt(energy)) break;
  }
  return energy;
}

/**
 * @brief Noise level for a given output signal-to-noise ratio.
 *
 * SNR = var(B/A u) / var(1/A v) for white u with standard deviation sigma_u.
 */
inline double sigma_for_snr(const LinearArxSystem& s, double snr_db, double sigma_u = 1.0) {
  if (!forward_stable(s)) throw ContractError("SNR is undefined for an unstable system");
  const double signal = sigma_u * sigma_u * impulse_energy(s, s.b);
  const double noise_gain = impulse_energy(s, {1.0});
  return std::sqrt(signal / (std::pow(10.0, snr_db / 10.0) * noise_gain));
}

/**
 * @brief Open-loop simulation with white Gaussian u and v.
 *
 * `burn_in` samples are simulated first and discarded, so the record starts
 * near stationarity. Stores u in both `u` and `du`; `r` is zero.
 */
inline Measurements simulate_arx(const LinearArxSystem& s, std::size_t n, double sigma_u, double sigma_v,
                                 std::uint64_t seed, std::size_t burn_in = 1000,
                                 std::vector<double>* noise = nullptr) {
  s.validate();
  const std::size_t total = n + burn_in;
  std::mt19937_64 rng_u(derive_seed(seed, 0));
  std::mt19937_64 rng_v(derive_seed(seed, 1));
  std::normal_distribution<double> normal_u(0.0, 1.0);
  std::normal_distribution<double> normal_v(0.0, 1.0);
  std::vector<double> y(total, 0.0), u(total, 0.0), v(total, 0.0);
  const std::size_t delay = static_cast<std::size_t>(s.nk) + 1;
  for (std::size_t t = 0; t < total; ++t) {
    u[t] = sigma_u * normal_u(rng_u);
    v[t] = sigma_v > 0.0 ? sigma_v * normal_v(rng_v) : 0.0;
    double yt = v[t];
    for (std::size_t i = 0; i < s.a.size() && i < t; ++i) yt += s.a[i] * y[t - 1 - i];
    for (std::size_t j = 0; j < s.b.size(); ++j) {
      if (t >= delay + j) yt += s.b[j] * u[t - delay - j];
    }
    y[t] = yt;
  }
  Measurements m;
  m.y.assign(y.begin() + static_cast<std::ptrdiff_t>(burn_in), y.end());
  m.u.assign(u.begin() + static_cast<std::ptrdiff_t>(burn_in), u.end());
  m.du = m.u;
  m.r.assign(n, 0.0);
  m.sample_time = 1.0;
  if (noise != nullptr) noise->assign(v.begin() + static_cast<std::ptrdiff_t>(burn_in), v.end());
  return m;
}

struct BiasReport {
  std::size_t trials = 0;
  std::size_t samples = 0;
  double sigma_v = 0.0;
  Eigen::VectorXd forward_true, inverse_true;
  Eigen::VectorXd forward_mean_error;    ///< mean of theta_hat - theta0
  Eigen::VectorXd forward_standard_error;
  Eigen::VectorXd inverse_mean_error;    ///< mean of theta_hat' - theta0'
  Eigen::VectorXd inverse_standard_error;
  /// -M^-1 e_1 sigma_v^2 / psi0 with M the trial-averaged inverse moment matrix.
  Eigen::VectorXd inverse_predicted_bias;
};

/**
 * @brief Monte-Carlo forward and inverse least-squares bias on a linear ARX system.
 *
 * Trial i uses seed derive_seed(seed, i); results do not depend on `threads`.
 *
 * @throws InversionError if the system has an unstable inverse.
 */
inline BiasReport estimate_inverse_bias(const LinearArxSystem& s, double sigma_v, std::size_t n,
                                        std::size_t trials, std::uint64_t seed, double sigma_u = 1.0,
                                        int threads = 1) {
  s.validate();
  if (!inverse_stable(s)) throw InversionError("ARX system has an unstable inverse (B has zeros outside the unit circle)");
  if (!forward_stable(s)) throw ContractError("ARX system is unstable");
  if (trials < 2) throw ContractError("bias estimation needs at least two trials");
  const ModelOrders orders = s.orders();
  const auto d = static_cast<Eigen::Index>(orders.size());
  std::vector<Eigen::VectorXd> fwd(trials), inv(trials);
  std::vector<Eigen::MatrixXd> moments(trials);
  auto run = [&](std::size_t i) {
    const Measurements m = simulate_arx(s, n, sigma_u, sigma_v, derive_seed(seed, i));
    const RegressionData f = build_dataset(m, orders, ModelDirection::forward);
    const RegressionData r = build_dataset(m, orders, ModelDirection::inverse);
    fwd[i] = fit_linear_ls(f.regressors, f.targets).theta;
    const LinearFit li = fit_linear_ls(r.regressors, r.targets);
    inv[i] = li.theta;
    moments[i] = li.moment;
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), trials);
  if (workers <= 1) {
    for (std::size_t i = 0; i < trials; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < trials; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  BiasReport rep;
  rep.trials = trials;
  rep.samples = n;
  rep.sigma_v = sigma_v;
  rep.forward_true = s.forward_parameters();
  rep.inverse_true = s.inverse_parameters();
  auto summarize = [&](const std::vector<Eigen::VectorXd>& est, const Eigen::VectorXd& truth,
                       Eigen::VectorXd& mean, Eigen::VectorXd& se) {
    mean = Eigen::VectorXd::Zero(d);
    for (const auto& e : est) mean += e - truth;
    mean /= static_cast<double>(trials);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& e : est) var += (e - truth - mean).array().square().matrix();
    var /= static_cast<double>(trials - 1);
    se = (var / static_cast<double>(trials)).cwiseSqrt();
  };
  summarize(fwd, rep.forward_true, rep.forward_mean_error, rep.forward_standard_error);
  summarize(inv, rep.inverse_true, rep.inverse_mean_error, rep.inverse_standard_error);
  Eigen::MatrixXd mbar = Eigen::MatrixXd::Zero(d, d);
  for (const auto& m : moments) mbar += m;
  mbar /= static_cast<double>(trials);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(d);
  e1[0] = sigma_v * sigma_v / s.psi();
  rep.inverse_predicted_bias = -mbar.ldlt().solve(e1);
  return rep;
}

}  // namespace pgff
