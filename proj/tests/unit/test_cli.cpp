#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <pgff/cli/commands.hpp>

using namespace pgff;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(seed: 3
reference:
  duration: 3
model:
  hidden: [4]
training:
  restarts: 1
  max_iterations: 5
evaluation:
  velocities: [0.1]
  velocity: 0.1
  reference:
    duration: 1
bias_demo:
  samples: 2000
  trials: 3
timing:
  duration: 0.5
  passes: 1
)";

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("pgff_test_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

cli::Context tiny_context(const fs::path& out) {
  cli::Context ctx;
  ctx.config = parse_config(kTinyConfig);
  ctx.seed = ctx.config.seed;
  ctx.out = out;
  return ctx;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(PGFF_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.experiment.plant.motion.mass, 17.5);
  EXPECT_EQ(c.experiment.plant.motion.viscous, 150.0);
  EXPECT_EQ(c.experiment.plant.motion.coulomb, 30.0);
  EXPECT_EQ(c.experiment.ident.lambda, 0.01);
  EXPECT_EQ(c.experiment.ident.train.restarts, 10);
  EXPECT_EQ(c.experiment.inversion.iterations, 5);
  EXPECT_EQ(c.experiment.ident.hidden, std::vector<int>{16});
  EXPECT_EQ(c.experiment.velocities.size(), 7u);
  EXPECT_EQ(c.controllers.size(), 4u);
  EXPECT_EQ(c.seed, 1u);
}

TEST(Config, ValuesAreRead) {
  const RunConfig c = parse_config(kTinyConfig);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.experiment.training_reference.duration, 3.0);
  EXPECT_EQ(c.experiment.ident.train.max_iterations, 5);
  EXPECT_EQ(c.experiment.evaluation_reference.duration, 1.0);
  EXPECT_EQ(c.bias.trials, 3u);
  EXPECT_EQ(c.timing.passes, 1u);
  const RunConfig n = parse_config("noise:\n  structure: noe\nfeedforward:\n  controllers: [physics, newton]\n");
  EXPECT_EQ(n.experiment.training_noise, NoiseStructure::noe);
  ASSERT_EQ(n.controllers.size(), 2u);
  EXPECT_EQ(n.controllers[1], FeedforwardMethod::newton);
}

TEST(Config, UnknownKeyReportsItsLine) {
  try {
    parse_config("plant:\n  mass: 10\n  colour: red\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("colour"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_config("sead: 4\n"), ConfigError);
}

TEST(Config, WrongTypesAndInvalidValuesAreRejected) {
  EXPECT_THROW(parse_config("plant:\n  mass: heavy\n"), ConfigError);
  EXPECT_THROW(parse_config("plant:\n  mass: -1\n"), ConfigError);
  EXPECT_THROW(parse_config("training:\n  restarts: 0\n"), ConfigError);
  EXPECT_THROW(parse_config("noise:\n  structure: pink\n"), ConfigError);
  EXPECT_THROW(parse_config("feedforward:\n  lower: 5\n  upper: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("model:\n  na: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("plant: [1, 2\n"), ConfigError);
}

TEST(Config, HashesSeparateIdentificationFromEvaluationSettings) {
  const RunConfig a = parse_config(kTinyConfig);
  const RunConfig b = parse_config(kTinyConfig);
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(identification_hash(a), identification_hash(b));
  RunConfig c = a;
  c.experiment.velocities.push_back(0.2);
  EXPECT_NE(config_hash(c), config_hash(a));
  EXPECT_EQ(identification_hash(c), identification_hash(a));
  RunConfig d = a;
  d.experiment.plant.motion.mass = 18.0;
  EXPECT_NE(identification_hash(d), identification_hash(a));
  RunConfig e = a;
  e.seed = 99;
  EXPECT_EQ(config_hash(e), config_hash(a));
  EXPECT_EQ(hash_hex(0x1234).size(), 16u);
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Commands, FullPipelineWritesExpectedFiles) {
  TempDir dir("pipeline");
  const cli::Context ctx = tiny_context(dir.path());
  cli::cmd_generate_data(ctx);
  ASSERT_TRUE(fs::exists(dir.path() / "data.csv"));
  EXPECT_EQ(read_file(dir.path() / "data.csv").rfind("# config_hash=" + ctx.hash(), 0), 0u);
  cli::cmd_train(ctx, cli::default_data_path(ctx), {ModelVariant::forward, ModelVariant::restricted, ModelVariant::inverse});
  for (const char* f : {"forward.pgnn", "restricted.pgnn", "inverse.pgnn", "anchors.json", "training.csv", "training.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  cli::cmd_evaluate(ctx, dir.path());
  for (const char* c : {"physics", "direct_inverse", "newton", "analytic"}) {
    EXPECT_TRUE(fs::exists(dir.path() / (std::string("trace_") + c + "_v0.100_s3.csv"))) << c;
  }
  EXPECT_TRUE(fs::exists(dir.path() / "evaluation.csv"));
  cli::cmd_sweep(ctx, dir.path());
  const std::string sweep = read_file(dir.path() / "sweep.csv");
  EXPECT_NE(sweep.find("analytic"), std::string::npos);
  cli::cmd_bias_demo(ctx);
  EXPECT_TRUE(fs::exists(dir.path() / "bias.csv"));
  cli::cmd_timing(ctx, dir.path());
  const auto timing = nlohmann::json::parse(read_file(dir.path() / "timing.json"));
  EXPECT_EQ(timing.at("config_hash").get<std::string>(), ctx.hash());
}

TEST(Commands, ExistingOutputsAreNotOverwrittenWithoutForce) {
  TempDir dir("overwrite");
  cli::Context ctx = tiny_context(dir.path());
  cli::cmd_generate_data(ctx);
  EXPECT_THROW(cli::cmd_generate_data(ctx), cli::OutputExistsError);
  ctx.force = true;
  EXPECT_NO_THROW(cli::cmd_generate_data(ctx));
}

TEST(Commands, ModelsFromAnotherConfigurationAreRejected) {
  TempDir dir("mismatch");
  const cli::Context ctx = tiny_context(dir.path());
  cli::cmd_generate_data(ctx);
  cli::cmd_train(ctx, cli::default_data_path(ctx), {ModelVariant::forward, ModelVariant::restricted, ModelVariant::inverse});
  cli::Context other = ctx;
  other.config.experiment.plant.motion.mass = 20.0;
  EXPECT_THROW(cli::cmd_evaluate(other, dir.path()), ConfigError);
  other.force = true;
  EXPECT_THROW(cli::cmd_train(other, cli::default_data_path(ctx), {ModelVariant::forward}), ConfigError);
  cli::Context eval_only = ctx;
  eval_only.config.experiment.velocities = {0.05};
  eval_only.force = true;
  EXPECT_NO_THROW(cli::cmd_sweep(eval_only, dir.path()));
}

TEST(Commands, MissingInputsAreReported) {
  TempDir dir("missing");
  const cli::Context ctx = tiny_context(dir.path());
  EXPECT_THROW(cli::cmd_train(ctx, dir.path() / "nope.csv", {ModelVariant::forward}), cli::InputError);
  cli::Context empty = ctx;
  empty.config.experiment.training_reference.duration = 0.0;
  EXPECT_THROW(cli::cmd_generate_data(empty), ConfigError);
}

TEST(Binary, ExitCodes) {
  TempDir dir("binary");
  const fs::path cfg = dir.path() / "tiny.yaml";
  std::ofstream(cfg) << kTinyConfig;
  const std::string common = " --config " + cfg.string() + " --out " + (dir.path() / "out").string();
  EXPECT_EQ(run_cli("generate-data" + common), 0);
  EXPECT_EQ(run_cli("generate-data" + common), 2);
  EXPECT_EQ(run_cli("generate-data" + common + " --force"), 0);
  EXPECT_EQ(run_cli("bogus-command"), 2);
  const fs::path bad = dir.path() / "bad.yaml";
  std::ofstream(bad) << "plant:\n  mass: -3\n";
  EXPECT_EQ(run_cli("generate-data --config " + bad.string() + " --out " + (dir.path() / "o2").string()), 2);
  EXPECT_EQ(run_cli("evaluate" + common), 2);
}

TEST(Config, ShippedDefaultFileMatchesBuiltInDefaults) {
  const RunConfig shipped = load_config(PGFF_DEFAULT_CONFIG);
  const RunConfig builtin = parse_config("");
  EXPECT_EQ(config_hash(shipped), config_hash(builtin));
  EXPECT_EQ(shipped.seed, builtin.seed);
  EXPECT_EQ(shipped.output, builtin.output);
}
