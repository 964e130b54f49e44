#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "tinyshape/signal_chain.hpp"

namespace tinyshape {

enum class ChannelModel { awgn, rayleigh, rician };

std::string_view to_string(ChannelModel m);
ChannelModel parse_channel_model(std::string_view name);

/// Block-flat channel. snr_db = +infinity disables noise.
///
/// SNR is defined in-band: mean power per occupied subcarrier of the
/// transmitted block divided by the noise power per frequency bin seen by the
/// receiver FFT. For a time block of M = n_fft * oversample samples carrying
/// n_sk occupied bins this gives a per-sample noise variance of
/// sigma^2 = mean|s|^2 * M / (n_sk * snr).
struct ChannelCfg {
  ChannelModel model = ChannelModel::awgn;
  double snr_db = 10.0;
  std::optional<double> k_factor_db;
  std::uint64_t seed = 0;

  void validate() const;
  bool noiseless() const noexcept;
};

struct ChannelOutput {
  SymbolBlock received;
  cplx fade{1.0, 0.0};
  double noise_variance = 0.0;     ///< per complex time sample
  double unit_noise_energy = 0.0;  ///< sum |u|^2 of the CN(0,1) draw before scaling
};

/// Noise variance per time sample for the given transmitted block.
double noise_variance_for(std::span<const cplx> signal, double snr_db, std::size_t n_occupied);

/// Draws the block fade h with E|h|^2 = 1 (AWGN returns 1).
cplx draw_fade(const ChannelCfg& cfg, std::uint64_t block_index);

/// y = h * s + w. Noise and fade come from independent streams derived from
/// (cfg.seed, block_index), so two signals sent with the same cfg and index
/// see the same unit-noise realization and the same fade.
/// `n_occupied` is the number of occupied subcarriers (defaults to cfg.n_sk()).
ChannelOutput apply_channel(const SymbolBlock& signal, const ChannelCfg& cfg, const ChainConfig& chain,
                            std::uint64_t block_index, std::optional<std::size_t> n_occupied = std::nullopt);

inline constexpr double kSnrEstimateCapDb = 60.0;

/// In-band SNR estimate from (received, reference) pairs: occupied-bin signal
/// power over occupied-bin residual power. Returns cap_db for a zero residual.
double estimate_snr(std::span<const SymbolBlock> rx_blocks, std::span<const SymbolBlock> truth,
                    const ChainConfig& chain, double cap_db = kSnrEstimateCapDb);

}  // namespace tinyshape
