#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgff/cli/config.hpp"
#include "pgff/core/serialize.hpp"
#include "pgff/eval/pipeline.hpp"
#include "pgff/ident/bias.hpp"

namespace pgff::cli {

/// An output file exists and overwriting was not requested.
class OutputExistsError : public Error {
 public:
  using Error::Error;
};

/// A required input file (dataset, model, anchors) is missing or unreadable.
class InputError : public Error {
 public:
  using Error::Error;
};

struct Context {
  RunConfig config;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  bool force = false;
  int threads = 1;

  std::string hash() const { return hash_hex(config_hash(config)); }
  std::uint64_t ident_hash() const { return identification_hash(config); }
};

/// Exit codes of the experiment runner.
enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kDivergence = 4 };

namespace detail {

using pgff::detail::format_double;

/// Creates the output directory and refuses to clobber existing files unless forced.
inline void claim_outputs(const Context& ctx, const std::vector<std::string>& names) {
  std::filesystem::create_directories(ctx.out);
  if (ctx.force) return;
  for (const auto& n : names) {
    if (std::filesystem::exists(ctx.out / n)) {
      throw OutputExistsError("output '" + (ctx.out / n).string() + "' exists; pass --force to overwrite");
    }
  }
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw Error("cannot open '" + p.string() + "' for writing");
  return f;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { open_output(p) << j.dump(2) << '\n'; }

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw InputError("cannot open '" + p.string() + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in '" + p.string() + "': " + e.what());
  }
}

inline nlohmann::json coefficients_json(const PhysicsLinearMotionParams& p) {
  return {p.coefficients[0], p.coefficients[1], p.coefficients[2]};
}

inline PhysicsLinearMotionParams anchor_from_json(const nlohmann::json& j, ModelDirection dir, double ts) {
  PhysicsLinearMotionParams p;
  p.direction = dir;
  p.sample_time = ts;
  if (!j.is_array() || j.size() != 3) throw InputError("anchor coefficients must be a list of three numbers");
  for (int i = 0; i < 3; ++i) p.coefficients[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  p.validate();
  return p;
}

inline std::string velocity_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::vector<ModelVariant> variants_for(const std::vector<FeedforwardMethod>& methods) {
  std::vector<ModelVariant> v;
  for (auto m : methods) {
    if (m == FeedforwardMethod::direct_inverse) v.push_back(ModelVariant::inverse);
    if (m == FeedforwardMethod::newton) v.push_back(ModelVariant::forward);
    if (m == FeedforwardMethod::analytic) v.push_back(ModelVariant::restricted);
  }
  return v;
}

}  // namespace detail

/// Dataset path used when none is given: data.csv in the output directory.
inline std::filesystem::path default_data_path(const Context& ctx) { return ctx.out / "data.csv"; }

/**
 * @brief generate-data: closed-loop identification experiment.
 *
 * Writes data.csv (t, r, u, du, y) and the data.json sidecar.
 */
inline void cmd_generate_data(const Context& ctx) {
  const auto& cfg = ctx.config.experiment;
  if (generate_reference(cfg.training_reference).empty()) {
    throw ConfigError("reference duration yields an empty dataset");
  }
  detail::claim_outputs(ctx, {"data.csv", "data.json"});
  const DataSet ds = generate_training_data(cfg, ctx.seed);
  write_dataset_csv(ds.data, (ctx.out / "data.csv").string(), ctx.hash());
  nlohmann::json meta = ds.metadata;
  meta["config_hash"] = ctx.hash();
  meta["identification_hash"] = hash_hex(ctx.ident_hash());
  detail::write_json(ctx.out / "data.json", meta);
}

/// Loads a dataset and checks its sidecar (when present) against the configuration.
inline Measurements load_dataset(const Context& ctx, const std::filesystem::path& csv) {
  if (!std::filesystem::exists(csv)) throw InputError("dataset '" + csv.string() + "' not found");
  Measurements m = read_dataset_csv(csv.string());
  std::filesystem::path sidecar = csv;
  sidecar.replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    const auto meta = detail::read_json(sidecar);
    if (meta.contains("identification_hash") &&
        meta["identification_hash"].get<std::string>() != hash_hex(ctx.ident_hash())) {
      throw ConfigError("dataset '" + csv.string() + "' was generated with a different plant/noise/reference configuration");
    }
  }
  const double ts = ctx.config.experiment.plant.sample_time;
  if (m.size() > 1 && std::abs(m.sample_time - ts) > 1e-9 * ts) {
    throw ConfigError("dataset sample time " + detail::format_double(m.sample_time) +
                      " s differs from the configured " + detail::format_double(ts) + " s");
  }
  if (m.size() <= ctx.config.experiment.ident.orders.warmup()) throw ConfigError("dataset is too short");
  return m;
}

/**
 * @brief train: least-squares anchors and the requested PGNN variants.
 *
 * Writes <variant>.pgnn, anchors.json, training.csv (one row per restart) and
 * training.json.
 */
inline void cmd_train(const Context& ctx, const std::filesystem::path& data_path,
                      const std::vector<ModelVariant>& variants) {
  const auto& cfg = ctx.config.experiment;
  std::vector<std::string> outputs{"anchors.json", "training.csv", "training.json"};
  for (auto v : variants) outputs.push_back(std::string(to_string(v)) + ".pgnn");
  detail::claim_outputs(ctx, outputs);
  const Measurements data = load_dataset(ctx, data_path);
  const PhysicsAnchors anchors = fit_anchors(cfg, data);

  std::ostringstream csv;
  csv << "# config_hash=" << ctx.hash() << '\n'
      << "variant,restart,seed,initial_cost,final_cost,iterations,converged,stop_reason,selected\n";
  nlohmann::json summary = {{"config_hash", ctx.hash()}, {"seed", ctx.seed}, {"models", nlohmann::json::array()}};
  for (auto v : variants) {
    TrainedModel t = train_variant(cfg, data, anchors, v, ctx.seed, ctx.threads);
    PgnnModel model = *t.model;
    model.config_hash = ctx.ident_hash();
    save_model(model, (ctx.out / (std::string(to_string(v)) + ".pgnn")).string());
    const auto& r = t.report;
    for (std::size_t i = 0; i < r.restarts.size(); ++i) {
      const auto& o = r.restarts[i];
      csv << to_string(v) << ',' << i << ',' << o.seed << ',' << detail::format_double(o.initial_cost) << ','
          << detail::format_double(o.final_cost) << ',' << o.iterations << ',' << (o.converged ? 1 : 0) << ','
          << o.stop_reason << ',' << (i == r.best_restart ? 1 : 0) << '\n';
    }
    nlohmann::json phys = detail::coefficients_json(model.physics);
    summary["models"].push_back({{"variant", to_string(v)},
                                 {"best_cost", r.best_cost},
                                 {"initial_cost", r.initial_cost},
                                 {"iterations", r.iterations},
                                 {"converged", r.converged},
                                 {"best_restart", r.best_restart},
                                 {"physics_coefficients", phys}});
  }
  detail::open_output(ctx.out / "training.csv") << csv.str();
  detail::write_json(ctx.out / "anchors.json",
                     {{"config_hash", ctx.hash()},
                      {"identification_hash", hash_hex(ctx.ident_hash())},
                      {"sample_time", cfg.plant.sample_time},
                      {"forward", detail::coefficients_json(anchors.forward)},
                      {"inverse", detail::coefficients_json(anchors.inverse)}});
  detail::write_json(ctx.out / "training.json", summary);
}

/// Loads the anchors and the models the given controllers need, rejecting models from another configuration.
inline IdentifiedModels load_models(const Context& ctx, const std::filesystem::path& dir,
                                    const std::vector<FeedforwardMethod>& methods) {
  const double ts = ctx.config.experiment.plant.sample_time;
  const auto anchors = detail::read_json(dir / "anchors.json");
  if (anchors.value("identification_hash", std::string()) != hash_hex(ctx.ident_hash())) {
    throw ConfigError("anchors in '" + dir.string() + "' were identified with a different configuration");
  }
  IdentifiedModels m;
  m.forward_anchor = detail::anchor_from_json(anchors.at("forward"), ModelDirection::forward, ts);
  m.inverse_anchor = detail::anchor_from_json(anchors.at("inverse"), ModelDirection::inverse, ts);
  for (auto v : detail::variants_for(methods)) {
    const auto path = dir / (std::string(to_string(v)) + ".pgnn");
    if (!std::filesystem::exists(path)) throw InputError("model file '" + path.string() + "' not found");
    auto model = std::make_shared<const PgnnModel>(load_model(path.string()));
    if (model->config_hash != ctx.ident_hash()) {
      throw ConfigError("model '" + path.string() + "' was trained with a different configuration");
    }
    TrainedModel t{to_string(v), model, {}};
    if (v == ModelVariant::forward) m.forward = t;
    if (v == ModelVariant::restricted) m.restricted = t;
    if (v == ModelVariant::inverse) m.inverse = t;
  }
  return m;
}

/**
 * @brief evaluate: one tracking run per controller at the configured velocity.
 *
 * Writes trace_<controller>_v<velocity>_s<seed>.csv per controller plus
 * evaluation.csv and evaluation.json summaries.
 */
inline void cmd_evaluate(const Context& ctx, const std::filesystem::path& models_dir) {
  const auto& cfg = ctx.config.experiment;
  const double v = ctx.config.evaluate_velocity;
  auto trace_name = [&](const std::string& c) {
    return "trace_" + c + "_v" + detail::velocity_tag(v) + "_s" + std::to_string(ctx.seed) + ".csv";
  };
  std::vector<std::string> outputs{"evaluation.csv", "evaluation.json"};
  for (auto m : ctx.config.controllers) outputs.push_back(trace_name(to_string(m)));
  detail::claim_outputs(ctx, outputs);
  const IdentifiedModels models = load_models(ctx, models_dir, ctx.config.controllers);
  const TrackingSetup setup = evaluation_setup(cfg, ctx.seed);
  ReferenceProfile profile = cfg.evaluation_reference;
  profile.max_velocity = v;
  const std::vector<double> r = generate_reference(profile);

  std::ostringstream summary;
  summary << "# config_hash=" << ctx.hash() << '\n' << "controller,velocity,mae,peak,rms\n";
  nlohmann::json js = {{"config_hash", ctx.hash()}, {"seed", ctx.seed}, {"velocity", v},
                       {"results", nlohmann::json::array()}};
  const double ts = cfg.plant.sample_time;
  for (auto method : ctx.config.controllers) {
    const TrackingResult res = run_tracking(setup, controller_spec(cfg, models, method), r);
    auto f = detail::open_output(ctx.out / trace_name(res.controller));
    f << "# config_hash=" << ctx.hash() << '\n'
      << "t,r,y,e,u_ff,u,newton_iterations,residual,floor_hits,saturated\n";
    for (std::size_t t = 0; t < res.r.size(); ++t) {
      const auto& d = res.diagnostics[t];
      f << detail::format_double(static_cast<double>(t) * ts) << ',' << detail::format_double(res.r[t]) << ','
        << detail::format_double(res.y[t]) << ',' << detail::format_double(res.error[t]) << ','
        << detail::format_double(res.u_ff[t]) << ',' << detail::format_double(res.u[t]) << ',' << d.iterations
        << ',' << detail::format_double(d.residual) << ',' << d.floor_hits << ',' << (d.saturated ? 1 : 0) << '\n';
    }
    const auto& mt = res.metrics;
    summary << res.controller << ',' << detail::format_double(v) << ',' << detail::format_double(mt.mae) << ','
            << detail::format_double(mt.peak) << ',' << detail::format_double(mt.rms) << '\n';
    js["results"].push_back({{"controller", res.controller}, {"mae", mt.mae}, {"peak", mt.peak}, {"rms", mt.rms},
                             {"trace", trace_name(res.controller)}});
  }
  detail::open_output(ctx.out / "evaluation.csv") << summary.str();
  detail::write_json(ctx.out / "evaluation.json", js);
}

/// sweep: tracking metrics per (controller, velocity); writes sweep.csv and sweep.json.
inline void cmd_sweep(const Context& ctx, const std::filesystem::path& models_dir) {
  const auto& cfg = ctx.config.experiment;
  detail::claim_outputs(ctx, {"sweep.csv", "sweep.json"});
  const IdentifiedModels models = load_models(ctx, models_dir, ctx.config.controllers);
  const auto specs = controller_specs(cfg, models, ctx.config.controllers);
  const auto cells = velocity_sweep(evaluation_setup(cfg, ctx.seed), specs, cfg.evaluation_reference,
                                    cfg.velocities, ctx.threads);
  std::ostringstream csv;
  csv << "# config_hash=" << ctx.hash() << '\n' << "controller,velocity,mae,peak,rms,ok,message\n";
  nlohmann::json js = {{"config_hash", ctx.hash()}, {"seed", ctx.seed}, {"cells", nlohmann::json::array()}};
  for (const auto& c : cells) {
    csv << c.controller << ',' << detail::format_double(c.velocity) << ',' << detail::format_double(c.metrics.mae)
        << ',' << detail::format_double(c.metrics.peak) << ',' << detail::format_double(c.metrics.rms) << ','
        << (c.ok ? 1 : 0) << ",\"" << c.message << "\"\n";
    js["cells"].push_back({{"controller", c.controller}, {"velocity", c.velocity}, {"mae", c.metrics.mae},
                           {"peak", c.metrics.peak}, {"rms", c.metrics.rms}, {"ok", c.ok},
                           {"message", c.message}});
  }
  detail::open_output(ctx.out / "sweep.csv") << csv.str();
  detail::write_json(ctx.out / "sweep.json", js);
}

/// bias-demo: Monte-Carlo forward versus inverse least squares on a linear ARX system.
inline void cmd_bias_demo(const Context& ctx) {
  const auto& b = ctx.config.bias;
  detail::claim_outputs(ctx, {"bias.csv", "bias.json"});
  const double sigma_v = sigma_for_snr(b.system, b.snr_db, b.sigma_u);
  const BiasReport rep = estimate_inverse_bias(b.system, sigma_v, b.samples, b.trials, ctx.seed, b.sigma_u,
                                               ctx.threads);
  std::ostringstream csv;
  csv << "# config_hash=" << ctx.hash() << '\n'
      << "direction,index,true,mean_error,standard_error,z,predicted_bias\n";
  nlohmann::json js = {{"config_hash", ctx.hash()}, {"seed", ctx.seed}, {"sigma_v", sigma_v},
                       {"snr_db", b.snr_db}, {"samples", b.samples}, {"trials", b.trials}};
  auto rows = [&](const char* dir, const Eigen::VectorXd& truth, const Eigen::VectorXd& mean,
                  const Eigen::VectorXd& se, const Eigen::VectorXd* predicted) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
      const double z = se[i] > 0.0 ? mean[i] / se[i] : 0.0;
      csv << dir << ',' << i << ',' << detail::format_double(truth[i]) << ',' << detail::format_double(mean[i])
          << ',' << detail::format_double(se[i]) << ',' << detail::format_double(z) << ','
          << (predicted != nullptr ? detail::format_double((*predicted)[i]) : std::string("0")) << '\n';
      arr.push_back({{"true", truth[i]}, {"mean_error", mean[i]}, {"standard_error", se[i]}, {"z", z}});
    }
    js[dir] = arr;
  };
  rows("forward", rep.forward_true, rep.forward_mean_error, rep.forward_standard_error, nullptr);
  rows("inverse", rep.inverse_true, rep.inverse_mean_error, rep.inverse_standard_error, &rep.inverse_predicted_bias);
  detail::open_output(ctx.out / "bias.csv") << csv.str();
  detail::write_json(ctx.out / "bias.json", js);
}

/**
 * @brief timing: mean per-sample feedforward compute time, single-threaded.
 *
 * Wall-clock numbers vary between runs, so the only output is timing.json.
 */
inline void cmd_timing(const Context& ctx, const std::filesystem::path& models_dir) {
  const auto& cfg = ctx.config.experiment;
  detail::claim_outputs(ctx, {"timing.json"});
  const IdentifiedModels models = load_models(ctx, models_dir, ctx.config.controllers);
  ReferenceProfile p = cfg.evaluation_reference;
  p.max_velocity = ctx.config.timing.velocity;
  p.duration = ctx.config.timing.duration;
  const auto rows = timing_report(controller_specs(cfg, models, ctx.config.controllers), generate_reference(p),
                                  cfg.plant.sample_time, ctx.config.timing.warmup, ctx.config.timing.passes);
  nlohmann::json js = {{"config_hash", ctx.hash()}, {"newton_iterations", cfg.inversion.iterations},
                       {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    js["rows"].push_back({{"controller", r.controller}, {"mean_seconds", r.mean_seconds},
                          {"max_seconds", r.max_seconds}, {"samples", r.samples}, {"passes", r.passes},
                          {"within_budget", r.within_budget}});
  }
  detail::write_json(ctx.out / "timing.json", js);
}

}  // namespace pgff::cli
