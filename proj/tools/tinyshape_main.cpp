// tinyshape: train, evaluate and replay adaptive pulse-shaping experiments.
//
//   tinyshape train|eval|sweep|adapt|baselines --config <path> [--seed N]
//             [--out DIR] [--threads N] [--checkpoint PATH] [--trace PATH]
//
// TINYSHAPE_OUT_DIR and TINYSHAPE_THREADS override the config file; flags
// override both.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tinyshape/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::string> checkpoint;
  std::optional<std::string> trace;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

tinyshape::ExperimentConfig resolve(const Options& o) {
  auto cfg = tinyshape::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) {
    cfg.output_dir = *o.out;
  } else if (auto e = env("TINYSHAPE_OUT_DIR")) {
    cfg.output_dir = *e;
  }
  if (o.threads) {
    cfg.threads = *o.threads;
  } else if (auto e = env("TINYSHAPE_THREADS")) {
    cfg.threads = static_cast<unsigned>(std::stoul(*e));
  }
  if (o.trace) cfg.adapt.trace = *o.trace;
  cfg.finalize();
  return cfg;
}

std::string checkpoint_path(const Options& o, const tinyshape::ExperimentConfig& cfg) {
  if (o.checkpoint) return *o.checkpoint;
  return (std::filesystem::path(cfg.output_dir) / tinyshape::kCheckpointFile).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive TinyML pulse shaping for DFT-s-OFDM"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a network; writes checkpoint.tsck and history.csv");
  add_common(train, o);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against the baselines");
  add_common(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: <out>/checkpoint.tsck)");
  auto* sweep = app.add_subcommand("sweep", "Train and compare hidden-layer widths");
  add_common(sweep, o);
  auto* adapt = app.add_subcommand("adapt", "Replay an SNR trace through the adaptation loop");
  add_common(adapt, o);
  adapt->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: <out>/checkpoint.tsck)");
  adapt->add_option("--trace", o.trace, "Trace CSV with header t_ms,snr_db");
  auto* baselines = app.add_subcommand("baselines", "Evaluate the baseline schemes only");
  add_common(baselines, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(o);
    tinyshape::CommandResult result;
    if (app.got_subcommand(train)) {
      result = tinyshape::cmd_train(cfg);
    } else if (app.got_subcommand(eval)) {
      result = tinyshape::cmd_eval(cfg, checkpoint_path(o, cfg));
    } else if (app.got_subcommand(sweep)) {
      result = tinyshape::cmd_sweep(cfg);
    } else if (app.got_subcommand(adapt)) {
      result = tinyshape::cmd_adapt(cfg, checkpoint_path(o, cfg));
    } else {
      result = tinyshape::cmd_baselines(cfg);
    }
    for (const auto& f : result.files) std::cout << "wrote " << f << '\n';
  } catch (const std::exception& e) {
    std::cerr << "tinyshape: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
