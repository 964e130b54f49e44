#pragma once

// Experiment configuration and the subcommands behind the command-line tool.
// Every command writes plain CSV/JSON files into the output directory.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tinyshape/baselines.hpp"
#include "tinyshape/evaluation.hpp"
#include "tinyshape/signal_chain.hpp"
#include "tinyshape/trainer.hpp"

namespace tinyshape {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AdaptSettings {
  std::optional<std::string> preset = "factory";
  std::optional<std::string> trace;  ///< CSV path; takes precedence over preset
  std::size_t blocks_per_tick = 10;
  double period_ms = 100.0;
  Modulation modulation = Modulation::qpsk;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned threads = 0;
  ChainConfig chain;
  TrainConfig train;
  EvalConfig eval;
  double rrc_rolloff = 0.25;
  ClfConfig clf;
  SlmConfig slm;
  AdaptSettings adapt;
  std::vector<std::size_t> sweep_hidden_widths{5, 10, 20, 0};

  /// Pushes seed and thread count into the sub-configs and validates all.
  void finalize();
};

/// Parses a JSON config. Unknown keys and type errors raise ConfigError
/// naming the key path (e.g. "train.lr").
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Baseline schemes: plain DFT-s-OFDM, RRC on the extended chain, CLF, SLM.
std::vector<Scheme> baseline_schemes(const ExperimentConfig& cfg);

struct CommandResult {
  std::vector<std::string> files;  ///< written paths, in write order
};

inline constexpr const char* kCheckpointFile = "checkpoint.tsck";

CommandResult cmd_train(const ExperimentConfig& cfg);
CommandResult cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path);
CommandResult cmd_sweep(const ExperimentConfig& cfg);
CommandResult cmd_adapt(const ExperimentConfig& cfg, const std::string& checkpoint_path);
CommandResult cmd_baselines(const ExperimentConfig& cfg);

}  // namespace tinyshape
