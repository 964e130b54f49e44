#pragma once

// Runtime adaptation loop: SNR feedback every period, lambda lookup and tap
// recomputation, replayed over a time-stamped SNR trace in simulated time.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tinyshape/signal_chain.hpp"
#include "tinyshape/tinynet.hpp"
#include "tinyshape/types.hpp"

namespace tinyshape {

struct LambdaBin {
  double lo_db;
  double hi_db;
  double lambda;
};

/// Half-open SNR bins [lo, hi); SNR below the first bin clamps to it.
struct LambdaTable {
  std::vector<LambdaBin> bins{
      {0.0, 5.0, 0.1},
      {5.0, 10.0, 0.3},
      {10.0, 15.0, 0.5},
      {15.0, 20.0, 0.8},
      {20.0, std::numeric_limits<double>::infinity(), 1.0},
  };

  void validate() const;
};

double lookup_lambda(const LambdaTable& table, double snr_db);

struct AdaptEvent {
  double t_ms = 0.0;
  double snr_db = 0.0;
  double lambda = 0.0;
  RVec coeffs;
};

struct AdaptState {
  double lambda = 0.0;
  RVec taps;
  double last_feedback_ms = -1.0;
  double period_ms = 100.0;
  std::vector<AdaptEvent> log;
};

struct CycleOutput {
  SymbolBlock shaped;
  RVec coeffs;
};

/// One feedback cycle at simulated time t_ms: lambda lookup, tap recomputation
/// from the network and shaping of s_ext.
CycleOutput adaptation_cycle(AdaptState& state, double t_ms, double snr_db, const InferenceNet& net,
                             const SymbolBlock& s_ext, const LambdaTable& table = {});

struct TracePoint {
  double t_ms = 0.0;
  double snr_db = 0.0;
};

/// Parses `t_ms,snr_db` CSV (header required). Throws on malformed rows.
std::vector<TracePoint> parse_trace(std::istream& in);
std::vector<TracePoint> load_trace(const std::string& path);

/// Constant-SNR preset traces: "factory" (5 dB) and "rural" (15 dB), 1 s long.
std::vector<TracePoint> preset_trace(const std::string& name);

/// Deterministic source of random payload bits for each transmitted block.
class TrafficGenerator {
 public:
  TrafficGenerator(std::uint64_t seed, Modulation scheme, const ChainConfig& chain);
  std::vector<std::uint8_t> bits(std::uint64_t block_index) const;
  Modulation scheme() const noexcept { return scheme_; }

 private:
  std::uint64_t seed_;
  Modulation scheme_;
  std::size_t n_bits_;
};

struct ScenarioConfig {
  double period_ms = 100.0;
  std::size_t blocks_per_tick = 10;
  std::uint64_t seed = 0;
  LambdaTable table;
};

struct TickRecord {
  double t_ms = 0.0;
  double snr_db = 0.0;
  double lambda = 0.0;
  double papr_db = 0.0;    ///< mean over the tick's blocks
  double ser_window = 0.0; ///< SER of the tick's blocks over AWGN at snr_db
  RVec coeffs;
};

struct ScenarioResult {
  std::vector<TickRecord> ticks;
  std::size_t tap_updates = 0;
};

/// Replays the trace on a period_ms clock from the first to the last sample
/// time, holding the latest SNR between samples. Requires a time-sorted trace.
ScenarioResult run_scenario(std::span<const TracePoint> trace, const InferenceNet& net, const TrafficGenerator& traffic,
                            const ChainConfig& chain, const ScenarioConfig& cfg);

}  // namespace tinyshape
