#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgff/ff/feedforward.hpp"
#include "pgff/plant/clm.hpp"
#include "pgff/plant/controller.hpp"
#include "pgff/plant/reference.hpp"
#include "pgff/plant/simulate.hpp"

namespace pgff {

/// Plant, feedback controller and evaluation noise shared by all tracking runs.
struct TrackingSetup {
  ClmParameters plant;
  PidGains pid;
  NoiseSpec noise;
  ParasiticForce parasitic;  ///< overrides the plant's cogging and friction model when set
  double divergence_bound = 0.0;

  ClmPlant make_plant() const { return parasitic ? ClmPlant(plant, parasitic) : ClmPlant(plant); }
};

struct TrackingMetrics {
  double mae = 0.0;
  double peak = 0.0;
  double rms = 0.0;
};

inline TrackingMetrics tracking_metrics(std::span<const double> error) {
  TrackingMetrics m;
  if (error.empty()) return m;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  for (double e : error) {
    sum_abs += std::abs(e);
    sum_sq += e * e;
    m.peak = std::max(m.peak, std::abs(e));
  }
  const auto n = static_cast<double>(error.size());
  m.mae = sum_abs / n;
  m.rms = std::sqrt(sum_sq / n);
  return m;
}

struct TrackingResult {
  std::string controller;
  std::vector<double> r, y, error, u_ff, u;
  TrackingMetrics metrics;
  std::vector<double> compute_seconds;  ///< per-sample feedforward time, empty unless timed
  std::vector<FeedforwardDiagnostics> diagnostics;
  nlohmann::json metadata;
};

/**
 * @brief Closed-loop tracking run u(t) = C(q^-1) e(t) + u_ff(t) without excitation.
 *
 * Deterministic for a fixed noise seed. With `measure_time` every
 * feedforward call is timed with a monotonic clock.
 */
inline TrackingResult run_tracking(const TrackingSetup& setup, const FeedforwardSpec& ff,
                                   std::span<const double> reference, bool measure_time = false) {
  TrackingResult res;
  res.controller = ff.name();
  FeedforwardController controller(ff, reference);
  res.u_ff.reserve(reference.size());
  res.diagnostics.reserve(reference.size());
  if (measure_time) res.compute_seconds.reserve(reference.size());
  FeedforwardFn fn = [&](std::size_t) {
    FeedforwardDiagnostics d;
    double u;
    if (measure_time) {
      const auto t0 = std::chrono::steady_clock::now();
      u = controller.next(&d);
      const auto t1 = std::chrono::steady_clock::now();
      res.compute_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    } else {
      u = controller.next(&d);
    }
    res.u_ff.push_back(u);
    res.diagnostics.push_back(d);
    return u;
  };
  ClosedLoopOptions options;
  options.excitation_sigma = 0.0;
  options.divergence_bound = setup.divergence_bound;
  DataSet ds = simulate_closed_loop(setup.make_plant(), make_pid(setup.pid, setup.plant.sample_time),
                                    reference, options, setup.noise, fn);
  res.r = std::move(ds.data.r);
  res.y = std::move(ds.data.y);
  res.u = std::move(ds.data.u);
  res.error.resize(res.r.size());
  for (std::size_t t = 0; t < res.r.size(); ++t) res.error[t] = res.r[t] - res.y[t];
  res.metrics = tracking_metrics(res.error);
  res.metadata = ds.metadata;
  res.metadata["feedforward"] = {{"method", res.controller},
                                 {"iterations", ff.inversion.iterations},
                                 {"lower", ff.inversion.lower},
                                 {"upper", ff.inversion.upper}};
  return res;
}

struct SweepCell {
  std::string controller;
  double velocity = 0.0;
  TrackingMetrics metrics;
  bool ok = true;
  std::string message;
};

/**
 * @brief Tracking metrics for every (controller, velocity) pair.
 *
 * `profile` is the evaluation reference; its max_velocity is replaced per
 * column. A failing cell is recorded with ok = false and the sweep goes on.
 * Cells are ordered controller-major and independent of `threads`.
 */
inline std::vector<SweepCell> velocity_sweep(const TrackingSetup& setup,
                                             const std::vector<FeedforwardSpec>& controllers,
                                             const ReferenceProfile& profile,
                                             const std::vector<double>& velocities, int threads = 1) {
  const std::size_t nv = velocities.size();
  std::vector<SweepCell> cells(controllers.size() * nv);
  auto run = [&](std::size_t i) {
    const auto& spec = controllers[i / nv];
    SweepCell& cell = cells[i];
    cell.controller = spec.name();
    cell.velocity = velocities[i % nv];
    try {
      ReferenceProfile p = profile;
      p.max_velocity = cell.velocity;
      const std::vector<double> r = generate_reference(p);
      cell.metrics = run_tracking(setup, spec, r).metrics;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.message = e.what();
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  return cells;
}

struct TimingRow {
  std::string controller;
  double mean_seconds = 0.0;  ///< smallest per-pass mean
  double max_seconds = 0.0;   ///< over all passes
  std::size_t samples = 0;    ///< timed samples per pass
  std::size_t passes = 0;
  bool within_budget = false;  ///< mean below the sample time
};

/**
 * @brief Mean wall-clock time per feedforward sample, single-threaded.
 *
 * Each controller runs over the whole reference on its own (the feedforward
 * does not depend on the plant output); the first `warmup` samples of a pass
 * are not counted. The pass is repeated `passes` times and the smallest mean
 * is reported, which filters out scheduler preemptions.
 */
inline std::vector<TimingRow> timing_report(const std::vector<FeedforwardSpec>& controllers,
                                            std::span<const double> reference, double sample_time,
                                            std::size_t warmup = 100, std::size_t passes = 5) {
  if (passes == 0) throw ContractError("timing needs at least one pass");
  std::vector<TimingRow> rows;
  volatile double sink = 0.0;
  for (const auto& spec : controllers) {
    TimingRow row;
    row.controller = spec.name();
    row.passes = passes;
    row.mean_seconds = std::numeric_limits<double>::infinity();
    for (std::size_t pass = 0; pass < passes; ++pass) {
      FeedforwardController c(spec, reference);
      double total = 0.0;
      std::size_t counted = 0;
      for (std::size_t t = 0; t < reference.size(); ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const double u = c.next();
        const auto t1 = std::chrono::steady_clock::now();
        sink = sink + u;
        if (t < warmup) continue;
        const double dt = std::chrono::duration<double>(t1 - t0).count();
        total += dt;
        row.max_seconds = std::max(row.max_seconds, dt);
        ++counted;
      }
      row.samples = counted;
      if (counted > 0) row.mean_seconds = std::min(row.mean_seconds, total / static_cast<double>(counted));
    }
    if (row.samples == 0) row.mean_seconds = 0.0;
    row.within_budget = row.samples > 0 && row.mean_seconds < sample_time;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pgff
