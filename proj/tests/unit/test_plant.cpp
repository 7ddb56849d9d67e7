#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <pgff/plant/clm.hpp>
#include <pgff/plant/controller.hpp>
#include <pgff/plant/dataset.hpp>
#include <pgff/plant/reference.hpp>
#include <pgff/plant/simulate.hpp>

using namespace pgff;

namespace {

ClmParameters rigid_body() {
  ClmParameters p;
  p.parasitic.cogging_amplitude = 0.0;
  p.parasitic.friction_asymmetry = 0.0;
  return p;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Reference, TrainingProfileShapeAndBounds) {
  ReferenceProfile p;
  const auto r = generate_reference(p);
  ASSERT_EQ(r.size(), 120000u);
  const double ts = p.sample_time;
  double vmax = 0, amax = 0, jmax = 0, rmax = 0;
  for (std::size_t k = 3; k < r.size(); ++k) {
    const double v = (r[k] - r[k - 1]) / ts;
    const double a = (r[k] - 2 * r[k - 1] + r[k - 2]) / (ts * ts);
    const double j = (r[k] - 3 * r[k - 1] + 3 * r[k - 2] - r[k - 3]) / (ts * ts * ts);
    vmax = std::max(vmax, std::abs(v));
    amax = std::max(amax, std::abs(a));
    jmax = std::max(jmax, std::abs(j));
    rmax = std::max(rmax, std::abs(r[k]));
  }
  EXPECT_LE(rmax, p.displacement + 1e-12);
  EXPECT_NEAR(rmax, p.displacement, 1e-9);
  EXPECT_LE(vmax, p.max_velocity * 1.01);
  EXPECT_GT(vmax, p.max_velocity * 0.99);
  EXPECT_LE(amax, p.max_acceleration * 1.01);
  EXPECT_LE(jmax, p.max_jerk * 1.01);
}

TEST(Reference, BackwardStrokeIsNegatedForwardStroke) {
  ReferenceProfile p;
  p.max_velocity = 0.15;
  p.duration = 20.0;
  const auto r = generate_reference(p);
  const auto stroke = DoubleSStroke::make(2 * p.displacement, p.max_velocity, p.max_acceleration, p.max_jerk);
  const double half = p.dwell + stroke.duration();
  auto up = [&](double local) { return -p.displacement + (local < p.dwell ? 0.0 : stroke.position(local - p.dwell)); };
  std::size_t checked = 0;
  for (std::size_t k = 0; k < r.size(); k += 13) {
    const double t = static_cast<double>(k) * p.sample_time;
    const double local = std::fmod(t, half);
    if (local < 1e-9 || half - local < 1e-9) continue;
    const bool forward = static_cast<long long>(std::floor(t / half)) % 2 == 0;
    EXPECT_NEAR(r[k], forward ? up(local) : -up(local), 1e-12) << "t=" << t;
    ++checked;
  }
  EXPECT_GT(checked, 1000u);
  EXPECT_NEAR(*std::max_element(r.begin(), r.end()), p.displacement, 1e-12);
  EXPECT_NEAR(*std::min_element(r.begin(), r.end()), -p.displacement, 1e-12);
}

TEST(Reference, VelocitySweepProfilesAreFeasible) {
  for (double v : {0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175}) {
    ReferenceProfile p;
    p.max_velocity = v;
    p.duration = 10.0;
    const auto r = generate_reference(p);
    double vmax = 0;
    for (std::size_t k = 1; k < r.size(); ++k) vmax = std::max(vmax, std::abs(r[k] - r[k - 1]) / p.sample_time);
    EXPECT_NEAR(vmax, v, 0.01 * v) << "v=" << v;
  }
}

TEST(Reference, ZeroDurationIsEmptyAndInfeasibleBoundsThrow) {
  ReferenceProfile p;
  p.duration = 0.0;
  EXPECT_TRUE(generate_reference(p).empty());
  p.duration = 1.0;
  p.max_velocity = 10.0;
  p.max_acceleration = 1.0;
  EXPECT_THROW(generate_reference(p), ContractError);
  EXPECT_THROW(DoubleSStroke::make(0.2, -1.0, 1.0, 1.0), ContractError);
}

TEST(Plant, NoiselessRigidBodyMatchesPhysicsRecursion) {
  const ClmParameters p = rigid_body();
  ClmPlant plant(p);
  plant.reset(0.01);
  const auto phys = PhysicsLinearMotionParams::from_motion(p.motion, p.sample_time);
  const ModelOrders orders;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> force(0.0, 40.0);
  double y1 = 0.01, y2 = 0.01;
  for (int t = 0; t < 2000; ++t) {
    const double u = force(rng);
    Regressor phi(3);
    phi << y1, y2, u;
    const double expected = physics_predict(phys, phi, orders);
    const double got = plant.step(u, 0.0, NoiseStructure::narx);
    ASSERT_NEAR(got, expected, 1e-12) << "t=" << t;
    y2 = y1;
    y1 = got;
  }
}

TEST(Plant, ZeroInputAtRestStaysAtRest) {
  ClmPlant plant(rigid_body());
  plant.reset(0.0);
  for (int t = 0; t < 100; ++t) EXPECT_EQ(plant.step(0.0, 0.0, NoiseStructure::noe), 0.0);
}

TEST(Plant, ParasiticForceFormula) {
  ClmParameters p;
  ClmPlant plant(p);
  const double y1 = 0.0123, y2 = 0.0122;
  const double cog = p.parasitic.cogging_amplitude * std::sin(2 * M_PI * y1 / p.parasitic.cogging_period);
  EXPECT_NEAR(plant.parasitic_force(y1, y2), cog + p.parasitic.friction_asymmetry * p.motion.coulomb, 1e-12);
  EXPECT_NEAR(plant.parasitic_force(y1, y1 + 1e-4), cog, 1e-12);
  EXPECT_NEAR(plant.parasitic_force(y1, y1), cog + 0.5 * p.parasitic.friction_asymmetry * p.motion.coulomb, 1e-12);
}

TEST(Plant, NarxAndNoeDivergeAfterFirstNoisySample) {
  ClmPlant a(ClmParameters{}), b(ClmParameters{});
  a.reset(0.0);
  b.reset(0.0);
  EXPECT_EQ(a.step(10.0, 1e-6, NoiseStructure::narx), b.step(10.0, 1e-6, NoiseStructure::noe));
  EXPECT_NE(a.step(10.0, 0.0, NoiseStructure::narx), b.step(10.0, 0.0, NoiseStructure::noe));
}

TEST(Plant, NieNoiseActsAsForce) {
  ClmPlant a(rigid_body()), b(rigid_body());
  a.reset(0.0);
  b.reset(0.0);
  EXPECT_DOUBLE_EQ(a.step(10.0, 5.0, NoiseStructure::nie), b.step(15.0, 0.0, NoiseStructure::nie));
}

TEST(Plant, InvalidParametersThrow) {
  ClmParameters p;
  p.motion.mass = 0.0;
  EXPECT_THROW(ClmPlant{p}, ContractError);
  p = ClmParameters{};
  p.parasitic.cogging_period = 0.0;
  EXPECT_THROW(ClmPlant{p}, ContractError);
}

TEST(Controller, PidMatchesContinuousGainsAtLowAndHighFrequency) {
  PidGains g;
  const double ts = 1e-3;
  auto c = make_pid(g, ts);
  // Step response: first sample is kp + ki Ts + kd / (tau + Ts).
  const double first = c.step(1.0);
  EXPECT_NEAR(first, g.kp + g.ki * ts + g.kd / (g.derivative_time_constant + ts), 1e-6);
  // Ramp of the integrator: after many steps the derivative term has decayed and u ~ kp + ki t.
  double u = first;
  for (int k = 1; k < 1000; ++k) u = c.step(1.0);
  EXPECT_NEAR(u, g.kp + g.ki * 1000 * ts, 1e-6 * u);
}

TEST(Controller, DelayLineMatchesDifferenceEquation) {
  LinearDiscreteController c({1.0, 0.5}, {1.0, -0.25});
  const std::vector<double> e{1, 2, 3};
  double u_prev = 0, e_prev = 0;
  for (double ek : e) {
    const double expected = ek + 0.5 * e_prev + 0.25 * u_prev;
    const double got = c.step(ek);
    EXPECT_DOUBLE_EQ(got, expected);
    u_prev = got;
    e_prev = ek;
  }
  EXPECT_THROW(LinearDiscreteController({1.0}, {2.0}), ContractError);
}

TEST(ClosedLoop, DefaultTrainingSetShapeAndStability) {
  ReferenceProfile p;
  const auto r = generate_reference(p);
  const DataSet ds = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, {}, NoiseSpec{});
  ASSERT_EQ(ds.size(), 120000u);
  double emax = 0;
  for (std::size_t t = 0; t < ds.size(); ++t) emax = std::max(emax, std::abs(ds.data.r[t] - ds.data.y[t]));
  EXPECT_LT(emax, 1e-3);
  EXPECT_EQ(ds.data.du.size(), ds.size());
  EXPECT_EQ(ds.noise.size(), ds.size());
}

TEST(ClosedLoop, PerfectFeedforwardGivesZeroError) {
  ClmParameters p = rigid_body();
  p.motion.coulomb = 0.0;
  ReferenceProfile prof;
  prof.duration = 5.0;
  const auto r = generate_reference(prof);
  const auto phys = PhysicsLinearMotionParams::from_motion(p.motion, p.sample_time);
  const ModelOrders orders;
  FeedforwardFn ff = [&](std::size_t t) {
    if (t + 1 >= r.size()) return 0.0;
    Regressor phi(3);
    phi << r[t], t > 0 ? r[t - 1] : r[0], 0.0;
    return physics_solve_input(phys, r[t + 1], phi, orders);
  };
  ClosedLoopOptions opt;
  opt.excitation_sigma = 0.0;
  NoiseSpec quiet{NoiseStructure::narx, 0.0, 1};
  const DataSet ds = simulate_closed_loop(ClmPlant(p), make_pid({}, 1e-3), r, opt, quiet, ff);
  for (std::size_t t = 0; t < ds.size(); ++t) ASSERT_NEAR(ds.data.r[t] - ds.data.y[t], 0.0, 1e-12) << t;
}

TEST(ClosedLoop, IdenticalSeedsAreBitExact) {
  ReferenceProfile p;
  p.duration = 3.0;
  const auto r = generate_reference(p);
  ClosedLoopOptions opt;
  opt.excitation_seed = 11;
  const NoiseSpec n{NoiseStructure::narx, 1e-6, 5};
  const DataSet a = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, opt, n);
  const DataSet b = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, opt, n);
  EXPECT_EQ(a.data.y, b.data.y);
  EXPECT_EQ(a.data.u, b.data.u);
  NoiseSpec other = n;
  other.seed = 6;
  const DataSet c = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, opt, other);
  EXPECT_NE(a.data.y, c.data.y);
  EXPECT_EQ(a.data.du, c.data.du);
  ClosedLoopOptions other_excitation = opt;
  other_excitation.excitation_seed = 12;
  const DataSet d = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, other_excitation, n);
  EXPECT_EQ(a.noise, d.noise);
}

TEST(ClosedLoop, DivergenceIsReported) {
  ReferenceProfile p;
  p.duration = 2.0;
  const auto r = generate_reference(p);
  LinearDiscreteController destabilizing({-1e6}, {1.0});
  EXPECT_THROW(simulate_closed_loop(ClmPlant(ClmParameters{}), destabilizing, r, {}, NoiseSpec{}), DivergenceError);
}

TEST(ClosedLoop, NarxCorrelationStructure) {
  ReferenceProfile p;
  p.duration = 100.0;
  const auto r = generate_reference(p);
  const DataSet ds = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, {}, NoiseSpec{});
  const ModelOrders orders;
  const auto fwd = build_dataset(ds.data, orders, ModelDirection::forward);
  const auto inv = build_dataset(ds.data, orders, ModelDirection::inverse);
  const std::size_t n = fwd.size();
  const double band = 3.0 / std::sqrt(static_cast<double>(n));
  // Forward regressors: v(t) is uncorrelated with every entry of phi(t).
  std::vector<double> v(n), col(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = ds.noise[fwd.times[k]];
  for (Eigen::Index i = 0; i < fwd.regressors.rows(); ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto j = static_cast<Eigen::Index>(k);
      col[k] = fwd.regressors(i, j);
    }
    EXPECT_LT(std::abs(correlation(v, col)), band) << "entry " << i;
  }
  // Inverse regressors: the leading output sample contains v(t+nk+1).
  std::vector<double> vi(inv.size()), lead(inv.size());
  for (std::size_t k = 0; k < inv.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    vi[k] = ds.noise[inv.times[k] + 1];
    lead[k] = inv.regressors(0, j) - 2 * inv.regressors(1, j) + inv.regressors(2, j);
  }
  EXPECT_GT(std::abs(correlation(vi, lead)), 0.1);
  // The excitation reaches the next output.
  std::vector<double> du(ds.size() - 1), y_next(ds.size() - 1);
  for (std::size_t t = 0; t + 1 < ds.size(); ++t) {
    du[t] = ds.data.du[t];
    y_next[t] = ds.data.y[t + 1] - 2 * ds.data.y[t] + (t > 0 ? ds.data.y[t - 1] : ds.data.y[0]);
  }
  EXPECT_GT(std::abs(correlation(du, y_next)), 0.1);
}

TEST(Dataset, CountsAndReconstruction) {
  ReferenceProfile p;
  p.duration = 1.0;
  const auto r = generate_reference(p);
  const DataSet ds = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, {}, NoiseSpec{});
  const ModelOrders o{2, 1, 0};
  const auto fwd = build_dataset(ds.data, o, ModelDirection::forward);
  EXPECT_EQ(fwd.size(), ds.size() - 2);
  const ModelOrders o2{2, 2, 1};
  const auto inv = build_dataset(ds.data, o2, ModelDirection::inverse);
  EXPECT_EQ(inv.size(), ds.size() - o2.warmup());
  EXPECT_EQ(inv.times.back(), ds.size() - 1 - 2);
  for (std::size_t k = 0; k < fwd.size(); k += 97) {
    const auto j = static_cast<Eigen::Index>(k);
    EXPECT_EQ(Regressor(fwd.regressors.col(j)), build_regressor(ds.data.y, ds.data.u, fwd.times[k], o));
    EXPECT_EQ(fwd.targets[j], ds.data.y[fwd.times[k]]);
  }
  for (std::size_t k = 0; k < inv.size(); k += 97) {
    const auto j = static_cast<Eigen::Index>(k);
    EXPECT_EQ(Regressor(inv.regressors.col(j)), build_inverse_regressor(ds.data.y, ds.data.u, inv.times[k], o2));
    EXPECT_EQ(inv.targets[j], ds.data.u[inv.times[k]]);
  }
  Measurements tiny;
  tiny.r = tiny.u = tiny.du = tiny.y = {0.0, 0.0};
  EXPECT_THROW(build_dataset(tiny, o, ModelDirection::forward), ContractError);
}

TEST(Dataset, CsvRoundTripIsExact) {
  ReferenceProfile p;
  p.duration = 0.5;
  const auto r = generate_reference(p);
  const DataSet ds = simulate_closed_loop(ClmPlant(ClmParameters{}), make_pid({}, 1e-3), r, {}, NoiseSpec{});
  const auto path = std::filesystem::temp_directory_path() / "pgff_dataset_roundtrip.csv";
  write_dataset_csv(ds.data, path.string(), "abc");
  const Measurements m = read_dataset_csv(path.string());
  EXPECT_EQ(m.y, ds.data.y);
  EXPECT_EQ(m.u, ds.data.u);
  EXPECT_EQ(m.du, ds.data.du);
  EXPECT_EQ(m.r, ds.data.r);
  EXPECT_NEAR(m.sample_time, 1e-3, 1e-15);
  std::filesystem::remove(path);
}
