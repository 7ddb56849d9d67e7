#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include <pgff/eval/tracking.hpp>
#include <pgff/plant/reference.hpp>

using namespace pgff;

namespace {

TrackingSetup rigid_setup(double sigma) {
  TrackingSetup s;
  s.plant.parasitic.cogging_amplitude = 0.0;
  s.plant.parasitic.friction_asymmetry = 0.0;
  s.noise = {NoiseStructure::noe, sigma, 4};
  return s;
}

std::vector<double> reference(double velocity, double duration = 3.0) {
  ReferenceProfile p;
  p.max_velocity = velocity;
  p.duration = duration;
  return generate_reference(p);
}

FeedforwardSpec physics_spec(const PhysicsLinearMotionParams& anchor) {
  FeedforwardSpec s;
  s.method = FeedforwardMethod::physics;
  s.anchor = anchor;
  return s;
}

}  // namespace

TEST(Metrics, HandComputedValues) {
  const std::vector<double> e{1.0, -3.0, 2.0};
  const TrackingMetrics m = tracking_metrics(e);
  EXPECT_DOUBLE_EQ(m.mae, 2.0);
  EXPECT_DOUBLE_EQ(m.peak, 3.0);
  EXPECT_DOUBLE_EQ(m.rms, std::sqrt(14.0 / 3.0));
  const TrackingMetrics z = tracking_metrics({});
  EXPECT_EQ(z.mae, 0.0);
  EXPECT_EQ(z.peak, 0.0);
}

TEST(Tracking, MetricsAreRecomputableFromTheTrace) {
  const TrackingSetup setup;
  const auto r = reference(0.15);
  const TrackingResult res = run_tracking(setup, physics_spec(PhysicsLinearMotionParams::from_motion({}, 1e-3)), r);
  ASSERT_EQ(res.error.size(), r.size());
  double sum = 0.0, peak = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    EXPECT_EQ(res.error[t], res.r[t] - res.y[t]);
    sum += std::abs(res.error[t]);
    peak = std::max(peak, std::abs(res.error[t]));
  }
  EXPECT_NEAR(res.metrics.mae, sum / static_cast<double>(r.size()), 1e-15);
  EXPECT_EQ(res.metrics.peak, peak);
  EXPECT_LE(res.metrics.mae, res.metrics.peak);
  EXPECT_GE(res.metrics.rms, res.metrics.mae);
  EXPECT_EQ(res.u_ff.size(), r.size());
  EXPECT_EQ(res.diagnostics.size(), r.size());
  EXPECT_EQ(res.controller, "physics");
}

TEST(Tracking, IdenticalSeedsGiveBitIdenticalTraces) {
  const TrackingSetup setup;
  const auto r = reference(0.1);
  const auto spec = physics_spec(PhysicsLinearMotionParams::from_motion({}, 1e-3));
  const TrackingResult a = run_tracking(setup, spec, r);
  const TrackingResult b = run_tracking(setup, spec, r);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.u, b.u);
  TrackingSetup other = setup;
  other.noise.seed = setup.noise.seed + 1;
  EXPECT_NE(run_tracking(other, spec, r).y, a.y);
}

TEST(Tracking, PerfectRestrictedModelWithAnalyticInverseTracksExactly) {
  // Coulomb friction is left out: at standstill sign(dy) of the simulated output depends on rounding.
  TrackingSetup setup = rigid_setup(0.0);
  setup.plant.motion.coulomb = 0.0;
  const auto truth = PhysicsLinearMotionParams::from_motion(setup.plant.motion, 1e-3);
  FeedforwardSpec spec;
  spec.method = FeedforwardMethod::analytic;
  spec.anchor = truth;
  spec.model = std::make_shared<const PgnnModel>(make_pgnn({}, truth, {4}, true));
  const TrackingResult res = run_tracking(setup, spec, reference(0.15));
  EXPECT_LT(res.metrics.mae, 1e-9);
}

TEST(Tracking, PhysicsFeedforwardBeatsFeedbackOnly) {
  const TrackingSetup setup;
  const auto r = reference(0.15);
  FeedforwardSpec none;
  const TrackingResult fb = run_tracking(setup, none, r);
  const TrackingResult ff = run_tracking(setup, physics_spec(PhysicsLinearMotionParams::from_motion({}, 1e-3)), r);
  EXPECT_LT(ff.metrics.mae, fb.metrics.mae);
  for (double u : fb.u_ff) EXPECT_EQ(u, 0.0);
}

TEST(Tracking, TimedRunRecordsEverySample) {
  const auto r = reference(0.05, 0.5);
  const TrackingResult res =
      run_tracking(TrackingSetup{}, physics_spec(PhysicsLinearMotionParams::from_motion({}, 1e-3)), r, true);
  ASSERT_EQ(res.compute_seconds.size(), r.size());
  for (double s : res.compute_seconds) EXPECT_GE(s, 0.0);
}

TEST(Sweep, CellsAreControllerMajorAndFailuresAreRecorded) {
  const TrackingSetup setup;
  const auto anchor = PhysicsLinearMotionParams::from_motion({}, 1e-3);
  std::vector<FeedforwardSpec> specs{FeedforwardSpec{}, physics_spec(anchor)};
  ReferenceProfile prof;
  prof.duration = 2.0;
  const std::vector<double> velocities{0.05, 50.0, 0.15};
  const auto cells = velocity_sweep(setup, specs, prof, velocities);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].controller, "none");
  EXPECT_EQ(cells[3].controller, "physics");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].velocity, velocities[i % 3]);
    EXPECT_EQ(cells[i].ok, i % 3 != 1) << i;
  }
  EXPECT_FALSE(cells[1].message.empty());
  EXPECT_LT(cells[5].metrics.mae, cells[2].metrics.mae);
  const auto threaded = velocity_sweep(setup, specs, prof, velocities, 3);
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(threaded[i].metrics.mae, cells[i].metrics.mae);
}

TEST(Sweep, StandstillReferenceLeavesOnlyNoise) {
  TrackingSetup setup = rigid_setup(1e-6);
  const std::vector<double> r(2000, 0.02);
  const auto anchor = PhysicsLinearMotionParams::from_motion(setup.plant.motion, 1e-3);
  const TrackingResult fb = run_tracking(setup, FeedforwardSpec{}, r);
  const TrackingResult ff = run_tracking(setup, physics_spec(anchor), r);
  EXPECT_LT(fb.metrics.mae, 5e-6);
  EXPECT_LT(ff.metrics.mae, 5e-6);
}

TEST(Timing, OneRowPerControllerWithConsistentCounts) {
  const auto anchor = PhysicsLinearMotionParams::from_motion({}, 1e-3);
  FeedforwardSpec newton;
  newton.method = FeedforwardMethod::newton;
  newton.anchor = anchor;
  newton.model = std::make_shared<const PgnnModel>(make_pgnn({}, anchor, {16}));
  const auto r = reference(0.15, 1.0);
  const auto rows = timing_report({physics_spec(anchor), newton}, r, 1e-3, 100, 3);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].controller, "physics");
  EXPECT_EQ(rows[1].controller, "newton");
  for (const auto& row : rows) {
    EXPECT_EQ(row.samples, r.size() - 100);
    EXPECT_EQ(row.passes, 3u);
    EXPECT_GT(row.mean_seconds, 0.0);
    EXPECT_LE(row.mean_seconds, row.max_seconds);
    EXPECT_EQ(row.within_budget, row.mean_seconds < 1e-3);
  }
  EXPECT_THROW(timing_report({physics_spec(anchor)}, r, 1e-3, 100, 0), ContractError);
}
