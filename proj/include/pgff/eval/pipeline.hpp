#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pgff/core/seed.hpp"
#include "pgff/eval/tracking.hpp"
#include "pgff/ident/consistency.hpp"
#include "pgff/ident/criterion.hpp"
#include "pgff/ident/least_squares.hpp"
#include "pgff/ident/train.hpp"

namespace pgff {

/// Seed streams derived from the master seed.
namespace seed_stream {
inline constexpr std::uint64_t noise = 1;
inline constexpr std::uint64_t excitation = 2;
inline constexpr std::uint64_t training = 3;
inline constexpr std::uint64_t evaluation = 4;
}  // namespace seed_stream

struct IdentificationSettings {
  ModelOrders orders;
  std::vector<int> hidden{16};
  double lambda = 0.01;  ///< Lambda = lambda * I
  bool difference_outputs = false;
  TrainConfig train;
};

/// Everything an end-to-end run depends on, except the master seed.
struct ExperimentConfig {
  ClmParameters plant;
  PidGains pid;
  ReferenceProfile training_reference;
  double excitation_sigma = 50.0;  ///< N
  NoiseStructure training_noise = NoiseStructure::narx;
  double noise_sigma = 1e-6;
  NoiseStructure evaluation_noise = NoiseStructure::noe;
  double evaluation_sigma = 1e-6;
  ReferenceProfile evaluation_reference = [] {
    ReferenceProfile p;
    p.duration = 10.0;
    return p;
  }();
  std::vector<double> velocities{0.025, 0.05, 0.075, 0.10, 0.125, 0.15, 0.175};
  IdentificationSettings ident;
  InversionConfig inversion;

  void validate() const {
    plant.validate();
    ident.orders.validate();
    ident.train.validate();
    inversion.validate();
    if (!(noise_sigma >= 0.0 && evaluation_sigma >= 0.0 && excitation_sigma >= 0.0)) {
      throw ContractError("noise and excitation levels must be non-negative");
    }
    if (!(ident.lambda >= 0.0)) throw ContractError("lambda must be non-negative");
    if (ident.hidden.empty()) throw ContractError("the network needs at least one hidden layer");
    if (velocities.empty()) throw ContractError("the velocity grid is empty");
    if (std::abs(training_reference.sample_time - plant.sample_time) > 1e-15 ||
        std::abs(evaluation_reference.sample_time - plant.sample_time) > 1e-15) {
      throw ContractError("reference and plant sample times differ");
    }
  }
};

/// Closed-loop identification experiment Z^N with excitation.
inline DataSet generate_training_data(const ExperimentConfig& cfg, std::uint64_t seed,
                                      const ParasiticForce& parasitic = {}) {
  cfg.validate();
  const std::vector<double> r = generate_reference(cfg.training_reference);
  ClosedLoopOptions options;
  options.excitation_sigma = cfg.excitation_sigma;
  options.excitation_seed = derive_seed(seed, seed_stream::excitation);
  NoiseSpec noise{cfg.training_noise, cfg.noise_sigma, derive_seed(seed, seed_stream::noise)};
  ClmPlant plant = parasitic ? ClmPlant(cfg.plant, parasitic) : ClmPlant(cfg.plant);
  DataSet ds = simulate_closed_loop(plant, make_pid(cfg.pid, cfg.plant.sample_time), r, options, noise);
  ds.metadata["seed"] = seed;
  return ds;
}

struct TrainedModel {
  std::string name;
  std::shared_ptr<const PgnnModel> model;
  FitReport report;
};

/// Physics anchors and the three trained model classes.
struct IdentifiedModels {
  PhysicsLinearMotionParams forward_anchor;  ///< least squares on forward pairs
  PhysicsLinearMotionParams inverse_anchor;  ///< least squares on inverse pairs
  TrainedModel forward;     ///< full forward PGNN (Newton inversion)
  TrainedModel restricted;  ///< network without u(t-nk-1) (analytic inversion)
  TrainedModel inverse;     ///< direct inverse PGNN
};

/// Trains one PGNN from `anchor` on `data`; the network normalization is fit on the data first.
inline TrainedModel train_model(const std::string& name, const ExperimentConfig& cfg, const RegressionData& data,
                                const PhysicsLinearMotionParams& anchor, bool exclude_input,
                                const IdentCriterion& criterion, std::uint64_t seed, int threads) {
  PgnnModel templ = make_pgnn(cfg.ident.orders, anchor, cfg.ident.hidden, exclude_input,
                              cfg.ident.difference_outputs);
  fit_normalization(templ.network, data.regressors);
  TrainConfig tc = cfg.ident.train;
  tc.seed = seed;
  tc.threads = threads;
  TrainedModel out;
  out.name = name;
  out.report = train_pgnn(templ, data, criterion, tc);
  out.model = std::make_shared<const PgnnModel>(out.report.model);
  return out;
}

enum class ModelVariant { forward, restricted, inverse };

inline const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::forward: return "forward";
    case ModelVariant::restricted: return "restricted";
    case ModelVariant::inverse: return "inverse";
  }
  return "?";
}

inline ModelVariant model_variant_from_string(const std::string& s) {
  for (auto v : {ModelVariant::forward, ModelVariant::restricted, ModelVariant::inverse}) {
    if (s == to_string(v)) return v;
  }
  throw ContractError("unknown model variant '" + s + "'");
}

struct PhysicsAnchors {
  PhysicsLinearMotionParams forward;  ///< least squares on forward pairs
  PhysicsLinearMotionParams inverse;  ///< least squares on inverse pairs
};

inline PhysicsAnchors fit_anchors(const ExperimentConfig& cfg, const Measurements& data) {
  const double ts = cfg.plant.sample_time;
  return {fit_physics_ls(build_dataset(data, cfg.ident.orders, ModelDirection::forward), ts),
          fit_physics_ls(build_dataset(data, cfg.ident.orders, ModelDirection::inverse), ts)};
}

/**
 * @brief Trains one of the three model classes.
 *
 * forward: full forward PGNN, all physics coefficients anchored.
 * restricted: network without u(t-nk-1), only zeta anchored.
 * inverse: inverse PGNN, all physics coefficients anchored.
 * Each variant draws its restarts from its own stream of the training seed.
 */
inline TrainedModel train_variant(const ExperimentConfig& cfg, const Measurements& data, const PhysicsAnchors& anchors,
                                  ModelVariant variant, std::uint64_t seed, int threads = 1) {
  cfg.validate();
  const std::uint64_t s = derive_seed(derive_seed(seed, seed_stream::training), static_cast<std::uint64_t>(variant));
  const double lam = cfg.ident.lambda;
  const std::string name = to_string(variant);
  if (variant == ModelVariant::inverse) {
    const RegressionData inv = build_dataset(data, cfg.ident.orders, ModelDirection::inverse);
    return train_model(name, cfg, inv, anchors.inverse, false, physics_anchored_criterion(anchors.inverse, lam), s,
                       threads);
  }
  const RegressionData fwd = build_dataset(data, cfg.ident.orders, ModelDirection::forward);
  if (variant == ModelVariant::restricted) {
    return train_model(name, cfg, fwd, anchors.forward, true, zeta_anchored_criterion(anchors.forward, lam), s,
                       threads);
  }
  return train_model(name, cfg, fwd, anchors.forward, false, physics_anchored_criterion(anchors.forward, lam), s,
                     threads);
}

/// Identification stage: least-squares anchors, then the three PGNNs.
inline IdentifiedModels identify_models(const ExperimentConfig& cfg, const Measurements& data, std::uint64_t seed,
                                        int threads = 1) {
  IdentifiedModels m;
  const PhysicsAnchors anchors = fit_anchors(cfg, data);
  m.forward_anchor = anchors.forward;
  m.inverse_anchor = anchors.inverse;
  m.forward = train_variant(cfg, data, anchors, ModelVariant::forward, seed, threads);
  m.restricted = train_variant(cfg, data, anchors, ModelVariant::restricted, seed, threads);
  m.inverse = train_variant(cfg, data, anchors, ModelVariant::inverse, seed, threads);
  return m;
}

/// Feedforward controller of the given method built from the identified models.
inline FeedforwardSpec controller_spec(const ExperimentConfig& cfg, const IdentifiedModels& m, FeedforwardMethod method) {
  FeedforwardSpec s;
  s.method = method;
  s.orders = cfg.ident.orders;
  s.anchor = m.forward_anchor;
  s.inversion = cfg.inversion;
  switch (method) {
    case FeedforwardMethod::direct_inverse: s.model = m.inverse.model; break;
    case FeedforwardMethod::newton: s.model = m.forward.model; break;
    case FeedforwardMethod::analytic: s.model = m.restricted.model; break;
    default: break;
  }
  return s;
}

/// The four compared controllers, in report order: physics, direct inverse, Newton, analytic.
inline std::vector<FeedforwardMethod> compared_methods() {
  return {FeedforwardMethod::physics, FeedforwardMethod::direct_inverse, FeedforwardMethod::newton,
          FeedforwardMethod::analytic};
}

inline std::vector<FeedforwardSpec> controller_specs(const ExperimentConfig& cfg, const IdentifiedModels& m,
                                                     const std::vector<FeedforwardMethod>& methods = compared_methods()) {
  std::vector<FeedforwardSpec> out;
  for (auto method : methods) out.push_back(controller_spec(cfg, m, method));
  return out;
}

/// Newton inversion of the restricted model, for comparison with its analytic inverse.
inline FeedforwardSpec restricted_newton_spec(const ExperimentConfig& cfg, const IdentifiedModels& m) {
  FeedforwardSpec s = controller_spec(cfg, m, FeedforwardMethod::newton);
  s.model = m.restricted.model;
  s.label = "newton_restricted";
  return s;
}

inline TrackingSetup evaluation_setup(const ExperimentConfig& cfg, std::uint64_t seed,
                                      const ParasiticForce& parasitic = {}) {
  TrackingSetup s;
  s.plant = cfg.plant;
  s.pid = cfg.pid;
  s.noise = {cfg.evaluation_noise, cfg.evaluation_sigma, derive_seed(seed, seed_stream::evaluation)};
  s.parasitic = parasitic;
  return s;
}

struct ConsistencyStudy {
  std::vector<std::size_t> sizes{5000, 20000, 100000};
  std::size_t trials = 5;
  std::uint64_t teacher_seed = 99;
  int grid_points = 15;
  std::size_t grid_samples = 100000;  ///< length of the record the grid box is taken from
};

struct ConsistencyOutcome {
  std::vector<ConsistencyRow> rows;  ///< function-space error in newtons
  RegressorGrid grid;
};

/**
 * @brief Function-space error of forward PGNNs trained on a plant whose parasitic force is a teacher network.
 *
 * The physics anchor is the true rigid-body model, so the plant lies in the
 * model class. Errors are sup-norm deviations from the noise-free one-step
 * map over the grid, converted to newtons by the input gain Ts^2 / m.
 */
inline ConsistencyOutcome pgnn_consistency(const ExperimentConfig& cfg, const ConsistencyStudy& study,
                                           std::uint64_t seed, int threads = 1) {
  cfg.validate();
  const MlpNetwork teacher = make_teacher_network(study.teacher_seed, cfg.ident.hidden.front(),
                                                  cfg.training_reference.displacement,
                                                  cfg.plant.parasitic.cogging_amplitude);
  const ParasiticForce g = teacher_force(teacher);
  const ClmPlant truth_plant(cfg.plant, g);
  const PhysicsLinearMotionParams anchor = truth_plant.physics();
  const ModelOrders orders = cfg.ident.orders;
  if (orders.na != 2 || orders.nb != 1) throw ContractError("the consistency study uses the plant's orders na=2, nb=1");

  auto record = [&](std::size_t n, std::uint64_t s) {
    ExperimentConfig c = cfg;
    c.training_reference.duration = static_cast<double>(n + orders.warmup()) * cfg.plant.sample_time;
    return build_dataset(generate_training_data(c, s, g).data, orders, ModelDirection::forward);
  };
  ConsistencyOutcome out;
  out.grid = RegressorGrid::from_data(record(study.grid_samples, derive_seed(seed, 1000)), study.grid_points);
  auto truth = [&](const Regressor& phi) {
    return truth_plant.propagate(phi[0], phi[1], phi[static_cast<Eigen::Index>(orders.input_slot())]);
  };
  auto error = [&](std::size_t n, std::uint64_t s) {
    const RegressionData d = record(n, s);
    const TrainedModel m = train_model("consistency", cfg, d, anchor, false,
                                       physics_anchored_criterion(anchor, cfg.ident.lambda),
                                       derive_seed(s, seed_stream::training), 1);
    return function_space_error(*m.model, truth, out.grid) / anchor.input_gain();
  };
  out.rows = consistency_sweep(error, study.sizes, study.trials, seed, threads);
  return out;
}

}  // namespace pgff
