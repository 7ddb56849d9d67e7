#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "pgff/error.hpp"
#include "pgff/eval/pipeline.hpp"
#include "pgff/ident/bias.hpp"

namespace pgff {

struct BiasDemoSettings {
  LinearArxSystem system;
  double snr_db = 40.0;
  std::size_t samples = 100000;
  std::size_t trials = 50;
  double sigma_u = 1.0;
};

struct TimingSettings {
  double velocity = 0.15;
  double duration = 10.0;  ///< s
  std::size_t warmup = 100;
  std::size_t passes = 5;
};

/// Experiment runner configuration: the pipeline settings plus run-level options.
struct RunConfig {
  ExperimentConfig experiment;
  std::vector<FeedforwardMethod> controllers{FeedforwardMethod::physics, FeedforwardMethod::direct_inverse,
                                             FeedforwardMethod::newton, FeedforwardMethod::analytic};
  double evaluate_velocity = 0.15;
  BiasDemoSettings bias;
  TimingSettings timing;
  std::uint64_t seed = 1;
  std::string output = "out";
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

/// Walks one mapping, rejecting keys that no reader asked for.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError("'" + path_ + "' must be a mapping", line_of(node_));
    }
  }

  bool present() const { return node_ && node_.IsMap(); }

  /// The value under `key`; undefined (false) when the key or the section is absent.
  YAML::Node child(const std::string& key) {
    known_.insert(key);
    if (!present()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& map = node_;
    return map[key];
  }

  template <class T>
  void read(const std::string& key, T& value) {
    const YAML::Node n = child(key);
    if (!n) return;
    try {
      value = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("'" + path_ + "." + key + "' has the wrong type", line_of(n));
    }
  }

  template <class T>
  void read_list(const std::string& key, std::vector<T>& value) {
    const YAML::Node n = child(key);
    if (!n) return;
    if (!n.IsSequence()) throw ConfigError("'" + path_ + "." + key + "' must be a list", line_of(n));
    std::vector<T> out;
    for (const auto& item : n) {
      try {
        out.push_back(item.as<T>());
      } catch (const YAML::Exception&) {
        throw ConfigError("'" + path_ + "." + key + "' has an entry of the wrong type", line_of(item));
      }
    }
    value = std::move(out);
  }

  template <class T, class Parse>
  void read_enum(const std::string& key, T& value, Parse parse) {
    std::string s;
    const YAML::Node n = child(key);
    if (!n) return;
    read(key, s);
    try {
      value = parse(s);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("'") + path_ + "." + key + "': " + e.what(), line_of(n));
    }
  }

  void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) {
      const YAML::Node n = child(key);
      throw ConfigError("'" + path_ + "." + key + "' " + what, n ? line_of(n) : line_of(node_));
    }
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known_.count(key)) {
        throw ConfigError("unknown key '" + (path_.empty() ? key : path_ + "." + key) + "'", line_of(kv.first));
      }
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> known_;
};

inline std::vector<FeedforwardMethod> parse_methods(Section& s, const std::string& key,
                                                    std::vector<FeedforwardMethod> current) {
  std::vector<std::string> names;
  for (auto m : current) names.emplace_back(to_string(m));
  s.read_list(key, names);
  std::vector<FeedforwardMethod> out;
  for (const auto& n : names) {
    try {
      out.push_back(feedforward_method_from_string(n));
    } catch (const ContractError& e) {
      s.require(false, key, e.what());
    }
  }
  return out;
}

}  // namespace detail

/**
 * @brief Parses a YAML configuration; missing keys keep their defaults.
 *
 * @throws ConfigError with the offending line for unknown keys, wrong types
 *         and out-of-range values.
 */
inline RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("YAML syntax error: " + e.msg, e.mark.line + 1);
  }
  RunConfig c;
  auto& x = c.experiment;
  detail::Section top(root, "");

  detail::Section plant(top.child("plant"), "plant");
  plant.read("mass", x.plant.motion.mass);
  plant.read("viscous", x.plant.motion.viscous);
  plant.read("coulomb", x.plant.motion.coulomb);
  plant.read("cogging_amplitude", x.plant.parasitic.cogging_amplitude);
  plant.read("cogging_period", x.plant.parasitic.cogging_period);
  plant.read("friction_asymmetry", x.plant.parasitic.friction_asymmetry);
  plant.read("sample_time", x.plant.sample_time);
  plant.require(x.plant.motion.mass > 0.0, "mass", "must be positive");
  plant.require(x.plant.sample_time > 0.0, "sample_time", "must be positive");
  plant.require(x.plant.parasitic.cogging_period > 0.0, "cogging_period", "must be positive");
  plant.finish();

  detail::Section pid(top.child("controller"), "controller");
  pid.read("kp", x.pid.kp);
  pid.read("ki", x.pid.ki);
  pid.read("kd", x.pid.kd);
  pid.read("derivative_time_constant", x.pid.derivative_time_constant);
  pid.require(x.pid.derivative_time_constant >= 0.0, "derivative_time_constant", "must be non-negative");
  pid.finish();

  detail::Section noise(top.child("noise"), "noise");
  noise.read_enum("structure", x.training_noise, noise_structure_from_string);
  noise.read("sigma", x.noise_sigma);
  noise.read("excitation_sigma", x.excitation_sigma);
  noise.require(x.noise_sigma >= 0.0, "sigma", "must be non-negative");
  noise.require(x.excitation_sigma >= 0.0, "excitation_sigma", "must be non-negative");
  noise.finish();

  auto read_profile = [](detail::Section& s, ReferenceProfile& p) {
    s.read("displacement", p.displacement);
    s.read("max_velocity", p.max_velocity);
    s.read("max_acceleration", p.max_acceleration);
    s.read("max_jerk", p.max_jerk);
    s.read("duration", p.duration);
    s.read("dwell", p.dwell);
    s.require(p.displacement > 0.0, "displacement", "must be positive");
    s.require(p.max_velocity > 0.0, "max_velocity", "must be positive");
    s.require(p.max_acceleration > 0.0, "max_acceleration", "must be positive");
    s.require(p.max_jerk > 0.0, "max_jerk", "must be positive");
    s.require(p.duration >= 0.0, "duration", "must be non-negative");
    s.require(p.dwell >= 0.0, "dwell", "must be non-negative");
  };
  detail::Section ref(top.child("reference"), "reference");
  read_profile(ref, x.training_reference);
  ref.finish();

  detail::Section model(top.child("model"), "model");
  model.read("na", x.ident.orders.na);
  model.read("nb", x.ident.orders.nb);
  model.read("nk", x.ident.orders.nk);
  model.read_list("hidden", x.ident.hidden);
  model.read("difference_outputs", x.ident.difference_outputs);
  model.require(x.ident.orders.na >= 2, "na", "must be at least 2 (second-order physics model)");
  model.require(x.ident.orders.nb >= 1, "nb", "must be at least 1");
  model.require(x.ident.orders.nk >= 0, "nk", "must be non-negative");
  model.require(!x.ident.hidden.empty(), "hidden", "needs at least one layer");
  for (int h : x.ident.hidden) model.require(h >= 1, "hidden", "widths must be positive");
  model.finish();

  detail::Section train(top.child("training"), "training");
  auto& tc = x.ident.train;
  train.read("lambda", x.ident.lambda);
  train.read("restarts", tc.restarts);
  train.read("max_iterations", tc.max_iterations);
  train.read("damping_init", tc.damping_init);
  train.read("damping_raise", tc.damping_raise);
  train.read("damping_lower", tc.damping_lower);
  train.read("gradient_tolerance", tc.gradient_tolerance);
  train.read("cost_tolerance", tc.cost_tolerance);
  train.read("init_scale", tc.init_scale);
  train.require(x.ident.lambda >= 0.0, "lambda", "must be non-negative");
  train.require(tc.restarts >= 1, "restarts", "must be at least 1");
  train.require(tc.max_iterations >= 0, "max_iterations", "must be non-negative");
  train.require(tc.damping_init > 0.0, "damping_init", "must be positive");
  train.require(tc.damping_raise > 1.0, "damping_raise", "must exceed 1");
  train.require(tc.damping_lower > 0.0 && tc.damping_lower < 1.0, "damping_lower", "must lie in (0, 1)");
  train.require(tc.gradient_tolerance > 0.0, "gradient_tolerance", "must be positive");
  train.require(tc.cost_tolerance > 0.0, "cost_tolerance", "must be positive");
  train.finish();

  detail::Section ff(top.child("feedforward"), "feedforward");
  auto& inv = x.inversion;
  ff.read("iterations", inv.iterations);
  ff.read("derivative_floor", inv.derivative_floor);
  ff.read("lower", inv.lower);
  ff.read("upper", inv.upper);
  ff.read("tolerance", inv.tolerance);
  c.controllers = detail::parse_methods(ff, "controllers", c.controllers);
  ff.require(inv.iterations >= 0, "iterations", "must be non-negative");
  ff.require(inv.derivative_floor > 0.0, "derivative_floor", "must be positive");
  ff.require(inv.lower < inv.upper, "upper", "must exceed 'lower'");
  ff.finish();

  detail::Section ev(top.child("evaluation"), "evaluation");
  ev.read_enum("noise_structure", x.evaluation_noise, noise_structure_from_string);
  ev.read("sigma", x.evaluation_sigma);
  ev.read_list("velocities", x.velocities);
  ev.read("velocity", c.evaluate_velocity);
  detail::Section evref(ev.child("reference"), "evaluation.reference");
  read_profile(evref, x.evaluation_reference);
  evref.finish();
  ev.require(x.evaluation_sigma >= 0.0, "sigma", "must be non-negative");
  ev.require(!x.velocities.empty(), "velocities", "must not be empty");
  for (double v : x.velocities) ev.require(v > 0.0, "velocities", "must be positive");
  ev.require(c.evaluate_velocity > 0.0, "velocity", "must be positive");
  ev.finish();

  detail::Section bias(top.child("bias_demo"), "bias_demo");
  bias.read_list("a", c.bias.system.a);
  bias.read_list("b", c.bias.system.b);
  bias.read("nk", c.bias.system.nk);
  bias.read("snr_db", c.bias.snr_db);
  bias.read("samples", c.bias.samples);
  bias.read("trials", c.bias.trials);
  bias.read("sigma_u", c.bias.sigma_u);
  bias.require(!c.bias.system.a.empty(), "a", "must not be empty");
  bias.require(!c.bias.system.b.empty() && c.bias.system.b.front() != 0.0, "b", "needs a nonzero leading entry");
  bias.require(c.bias.system.nk >= 0, "nk", "must be non-negative");
  bias.require(c.bias.trials >= 2, "trials", "must be at least 2");
  bias.require(c.bias.samples > c.bias.system.orders().warmup(), "samples", "is shorter than the warm-up");
  bias.require(c.bias.sigma_u > 0.0, "sigma_u", "must be positive");
  bias.finish();

  detail::Section timing(top.child("timing"), "timing");
  timing.read("velocity", c.timing.velocity);
  timing.read("duration", c.timing.duration);
  timing.read("warmup", c.timing.warmup);
  timing.read("passes", c.timing.passes);
  timing.require(c.timing.passes >= 1, "passes", "must be at least 1");
  timing.require(c.timing.velocity > 0.0, "velocity", "must be positive");
  timing.require(c.timing.duration > 0.0, "duration", "must be positive");
  timing.finish();

  top.read("seed", c.seed);
  top.read("output", c.output);
  top.finish();

  x.training_reference.sample_time = x.plant.sample_time;
  x.evaluation_reference.sample_time = x.plant.sample_time;
  try {
    x.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

inline nlohmann::json profile_json(const ReferenceProfile& p) {
  return {{"displacement", p.displacement}, {"max_velocity", p.max_velocity},
          {"max_acceleration", p.max_acceleration}, {"max_jerk", p.max_jerk},
          {"duration", p.duration}, {"dwell", p.dwell}};
}

/// Sections that determine the identification data and the trained models.
inline nlohmann::json identification_json(const RunConfig& c) {
  const auto& x = c.experiment;
  const auto& tc = x.ident.train;
  return {
      {"plant",
       {{"mass", x.plant.motion.mass},
        {"viscous", x.plant.motion.viscous},
        {"coulomb", x.plant.motion.coulomb},
        {"cogging_amplitude", x.plant.parasitic.cogging_amplitude},
        {"cogging_period", x.plant.parasitic.cogging_period},
        {"friction_asymmetry", x.plant.parasitic.friction_asymmetry},
        {"sample_time", x.plant.sample_time}}},
      {"controller",
       {{"kp", x.pid.kp}, {"ki", x.pid.ki}, {"kd", x.pid.kd},
        {"derivative_time_constant", x.pid.derivative_time_constant}}},
      {"noise",
       {{"structure", to_string(x.training_noise)}, {"sigma", x.noise_sigma},
        {"excitation_sigma", x.excitation_sigma}}},
      {"reference", profile_json(x.training_reference)},
      {"model",
       {{"na", x.ident.orders.na}, {"nb", x.ident.orders.nb}, {"nk", x.ident.orders.nk},
        {"hidden", x.ident.hidden}, {"difference_outputs", x.ident.difference_outputs}}},
      {"training",
       {{"lambda", x.ident.lambda}, {"restarts", tc.restarts}, {"max_iterations", tc.max_iterations},
        {"damping_init", tc.damping_init}, {"damping_raise", tc.damping_raise},
        {"damping_lower", tc.damping_lower}, {"gradient_tolerance", tc.gradient_tolerance},
        {"cost_tolerance", tc.cost_tolerance}, {"init_scale", tc.init_scale}}},
  };
}

/// The complete effective configuration (defaults filled in), without the run seed and output path.
inline nlohmann::json config_json(const RunConfig& c) {
  const auto& x = c.experiment;
  nlohmann::json j = identification_json(c);
  std::vector<std::string> methods;
  for (auto m : c.controllers) methods.emplace_back(to_string(m));
  j["feedforward"] = {{"iterations", x.inversion.iterations}, {"derivative_floor", x.inversion.derivative_floor},
                      {"lower", x.inversion.lower}, {"upper", x.inversion.upper},
                      {"tolerance", x.inversion.tolerance}, {"controllers", methods}};
  j["evaluation"] = {{"noise_structure", to_string(x.evaluation_noise)}, {"sigma", x.evaluation_sigma},
                     {"velocities", x.velocities}, {"velocity", c.evaluate_velocity},
                     {"reference", profile_json(x.evaluation_reference)}};
  j["bias_demo"] = {{"a", c.bias.system.a}, {"b", c.bias.system.b}, {"nk", c.bias.system.nk},
                    {"snr_db", c.bias.snr_db}, {"samples", c.bias.samples}, {"trials", c.bias.trials},
                    {"sigma_u", c.bias.sigma_u}};
  j["timing"] = {{"velocity", c.timing.velocity}, {"duration", c.timing.duration}, {"warmup", c.timing.warmup},
                 {"passes", c.timing.passes}};
  return j;
}

/// Hash of the identification sections; stored in model files to reject mismatched configs.
inline std::uint64_t identification_hash(const RunConfig& c) { return fnv1a(identification_json(c).dump()); }

/// Hash of the whole effective configuration; written into every output file.
inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a(config_json(c).dump()); }

}  // namespace pgff
