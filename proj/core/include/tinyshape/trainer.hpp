#pragma once

// Offline training: per-block draws over SNR, channel and modulation, the
// loss mse + lambda(snr) * softplus_beta(papr - x0) with analytic gradients
// through the transmit chain and equalizer, AdamW, pruning and quantization.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tinyshape/adaptation.hpp"
#include "tinyshape/channel.hpp"
#include "tinyshape/checkpoint.hpp"
#include "tinyshape/signal_chain.hpp"
#include "tinyshape/tinynet.hpp"

namespace tinyshape {

enum class PruneMode { per_epoch, target };

struct PruneSchedule {
  PruneMode mode = PruneMode::target;
  double per_epoch_fraction = 0.2;
  double target_sparsity = 0.8;
  /// Target mode ramps sparsity by this much per epoch, reaching the target
  /// no later than the final epoch.
  double ramp_per_epoch = 0.2;
};

struct ChannelMix {
  double awgn = 0.5;
  double rayleigh = 0.5;
  double rician = 0.0;
  double rician_k_db = 3.0;
};

struct ModMix {
  double qpsk = 0.5;
  double qam16 = 0.5;
};

struct TrainConfig {
  std::size_t n_blocks = 10000;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  AdamWConfig adam;
  PruneSchedule prune;
  double snr_lo_db = 0.0;
  double snr_hi_db = 20.0;
  ChannelMix channel_mix;
  ModMix mod_mix;
  std::size_t hidden_width = 10;
  std::size_t n_coeffs = 5;
  double x0_db = 6.0;
  double sharpness = 1.0;  ///< softplus beta, per dB
  double grad_clip = 1.0;  ///< global gradient-norm clip; 0 disables
  std::uint64_t seed = 0;
  unsigned threads = 0;    ///< execution only; excluded from the config hash

  void validate() const;
  /// Stable text form of every result-affecting field.
  std::string canonical() const;
  std::uint64_t hash() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BlockDraw {
  std::uint64_t index = 0;
  std::vector<std::uint8_t> bits;
  Modulation scheme = Modulation::qpsk;
  ChannelCfg channel;
};

/// Fully determined by (config.seed, block_index).
BlockDraw generate_block(const TrainConfig& config, const ChainConfig& chain, std::uint64_t block_index);

struct LossParams {
  double lambda = 0.5;
  double x0_db = 6.0;
  double sharpness = 1.0;
};

struct BlockLoss {
  double loss = 0.0;
  double mse = 0.0;
  double surrogate = 0.0;
  double papr_db = 0.0;
  RVec grad_taps;    ///< dL / dF
  RVec grad_coeffs;  ///< dL / dr
};

/// Loss of one block for polynomial coefficients `coeffs` and its gradient.
/// The MSE term is the expectation over the noise draw of the equalized
/// error for draw.channel's fade and SNR. Noise power follows the realized
/// transmit power, which the gradient accounts for.
BlockLoss block_loss(std::span<const double> coeffs, const SymbolBlock& s_data_freq, const BlockDraw& draw,
                     const ChainConfig& chain, const LossParams& lp);

struct NetBlockResult {
  BlockLoss loss;
  NetGradients grads;
};

/// Network forward, block_loss and network backward for one draw.
NetBlockResult net_block_loss(const NetParams& params, const BlockDraw& draw, const ChainConfig& chain,
                              const LossParams& lp);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<RVec> batch_losses;  ///< per epoch, in batch order
};

TrainResult train(const TrainConfig& config, const ChainConfig& chain);

/// Rounds every parameter and optimizer moment to float32 precision.
void snap_to_float32(NetParams& params, OptState& opt);

}  // namespace tinyshape
