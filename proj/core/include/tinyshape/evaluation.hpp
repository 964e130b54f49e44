#pragma once

// Frozen-network and baseline Monte-Carlo evaluation. Every scheme in a run
// sees the same payload bits and channel realizations block by block.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tinyshape/baselines.hpp"
#include "tinyshape/channel.hpp"
#include "tinyshape/loss_metrics.hpp"
#include "tinyshape/signal_chain.hpp"
#include "tinyshape/tinynet.hpp"

namespace tinyshape {

enum class SchemeKind {
  network,     ///< taps from the network on the extended chain
  static_taps, ///< fixed taps on the scheme's own chain
  clf,         ///< unit taps, then clipping and filtering
  slm,         ///< selective mapping over the scheme's chain
};

struct Scheme {
  std::string name;
  SchemeKind kind = SchemeKind::static_taps;
  ChainConfig chain;
  RVec taps;                          ///< static taps (static_taps, clf, slm)
  std::shared_ptr<const InferenceNet> net;
  ClfConfig clf;
  std::vector<CVec> slm_phases;
};

Scheme network_scheme(std::string name, InferenceNet net, const ChainConfig& chain);
Scheme static_scheme(std::string name, RVec taps, const ChainConfig& chain);
Scheme clf_scheme(std::string name, const ClfConfig& cfg, const ChainConfig& chain);
Scheme slm_scheme(std::string name, const SlmConfig& cfg, const ChainConfig& chain);

struct BlockOutcome {
  SymbolBlock tx;
  double papr_db = 0.0;
  double mse = 0.0;
  SerCount ser;
  double unit_noise_energy = 0.0;
  RVec taps;
};

/// Payload bits for block `index` of a run seeded by `seed`.
std::vector<std::uint8_t> block_bits(std::uint64_t seed, std::uint64_t index, Modulation scheme,
                                     const ChainConfig& chain);

/// Transmits one block of `scheme`, optionally through a channel, and
/// receives it. `net_snr_db` is the SNR fed to a network scheme. Without a
/// channel only the transmit side is evaluated (no SER or MSE).
BlockOutcome simulate_block(const Scheme& scheme, std::span<const std::uint8_t> bits, Modulation mod,
                            double net_snr_db, const ChannelCfg* channel, std::uint64_t block_index);

/// Noiseless transmit-only PAPR samples for n_blocks paired blocks.
RVec papr_samples(const Scheme& scheme, Modulation mod, double net_snr_db, std::size_t n_blocks, std::uint64_t seed,
                  unsigned threads);

/// Transmit blocks kept for spectral analysis.
std::vector<SymbolBlock> transmit_blocks(const Scheme& scheme, Modulation mod, double net_snr_db, std::size_t n_blocks,
                                         std::uint64_t seed, unsigned threads);

/// Monte-Carlo cell: n_blocks through `channel` at channel.snr_db.
RunMetrics evaluate_cell(const Scheme& scheme, const ChannelCfg& channel, Modulation mod, std::size_t n_blocks,
                         std::uint64_t seed, unsigned threads, std::span<const double> ccdf_grid);

struct EvalConfig {
  std::size_t ccdf_blocks = 20000;
  double ccdf_snr_db = 10.0;
  Modulation ccdf_mod = Modulation::qpsk;
  RVec snr_db{0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<ChannelModel> channels{ChannelModel::awgn, ChannelModel::rayleigh, ChannelModel::rician};
  double rician_k_db = 3.0;
  std::vector<Modulation> mods{Modulation::qpsk, Modulation::qam16};
  std::size_t ser_blocks = 500;
  std::size_t paired_blocks = 1000;
  std::size_t oobe_blocks = 200;
  double ccdf_lo_db = 0.0;
  double ccdf_hi_db = 12.0;
  double ccdf_step_db = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
  RVec ccdf_grid() const;
};

struct CellResult {
  std::string scheme;
  ChannelModel channel = ChannelModel::awgn;
  Modulation mod = Modulation::qpsk;
  double snr_db = 0.0;
  RunMetrics metrics;
};

struct SchemeSummary {
  RVec ccdf_samples;
  std::vector<CcdfPoint> ccdf;
  double papr_at_1e3_db = 0.0;
  double mean_papr_db = 0.0;      ///< over the CCDF run
  double paired_mean_papr_db = 0.0;
  RVec paired_papr;               ///< per block index
  double oobe_db = 0.0;
};

struct EvalReport {
  std::vector<std::string> scheme_order;
  std::map<std::string, SchemeSummary> schemes;
  std::vector<CellResult> cells;
};

/// Deterministic seed of a (channel, snr index, modulation) cell.
std::uint64_t cell_seed(std::uint64_t seed, ChannelModel channel, std::size_t snr_index, Modulation mod);

EvalReport evaluate(std::span<const Scheme> schemes, const EvalConfig& cfg);

}  // namespace tinyshape
