#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgff/cli/commands.hpp"

namespace {

using namespace pgff;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  int threads = 1;
};

cli::Context make_context(const Options& o) {
  cli::Context ctx;
  ctx.config = o.config.empty() ? RunConfig{} : load_config(o.config);
  ctx.seed = o.seed.value_or(ctx.config.seed);
  ctx.out = o.out.empty() ? ctx.config.output : o.out;
  ctx.force = o.force;
  ctx.threads = o.threads;
  return ctx;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "YAML configuration file (defaults apply when omitted)");
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_flag("--force", o.force, "overwrite existing outputs");
  cmd->add_option("--threads", o.threads, "worker threads for restarts, trials and sweep cells")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedforward identification and inversion experiments on a simulated linear motor"};
  app.require_subcommand(1);
  Options o;
  std::string data_path;
  std::string models_dir;
  std::vector<std::string> variants{"forward", "restricted", "inverse"};

  auto* gen = app.add_subcommand("generate-data", "simulate the closed-loop identification experiment");
  add_common(gen, o);
  auto* train = app.add_subcommand("train", "fit physics anchors and train PGNN variants");
  add_common(train, o);
  train->add_option("--data", data_path, "dataset CSV (default: <out>/data.csv)");
  train->add_option("--variant", variants, "variants to train: forward, restricted, inverse")
      ->check(CLI::IsMember({"forward", "restricted", "inverse"}));
  auto* eval = app.add_subcommand("evaluate", "closed-loop tracking per controller at one velocity");
  add_common(eval, o);
  auto* sweep = app.add_subcommand("sweep", "tracking metrics over the velocity grid");
  add_common(sweep, o);
  auto* bias = app.add_subcommand("bias-demo", "Monte-Carlo forward vs inverse least-squares bias");
  add_common(bias, o);
  auto* timing = app.add_subcommand("timing", "per-sample feedforward compute time");
  add_common(timing, o);
  for (auto* cmd : {eval, sweep, timing}) {
    cmd->add_option("--models", models_dir, "directory with anchors.json and *.pgnn (default: <out>)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kConfigError;
  }

  try {
    const cli::Context ctx = make_context(o);
    const std::filesystem::path models = models_dir.empty() ? ctx.out : std::filesystem::path(models_dir);
    if (gen->parsed()) {
      cli::cmd_generate_data(ctx);
    } else if (train->parsed()) {
      std::vector<ModelVariant> vs;
      for (const auto& v : variants) vs.push_back(model_variant_from_string(v));
      cli::cmd_train(ctx, data_path.empty() ? cli::default_data_path(ctx) : std::filesystem::path(data_path), vs);
    } else if (eval->parsed()) {
      cli::cmd_evaluate(ctx, models);
    } else if (sweep->parsed()) {
      cli::cmd_sweep(ctx, models);
    } else if (bias->parsed()) {
      cli::cmd_bias_demo(ctx);
    } else if (timing->parsed()) {
      cli::cmd_timing(ctx, models);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const cli::OutputExistsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const cli::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return cli::kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return cli::kNumericalError;
  }
  return cli::kOk;
}
