#pragma once

// DFT-s-OFDM transmit/receive chain with spectrum extension and real-valued
// frequency-domain shaping.
//
// Transmit:  bits -> constellation -> DFT precode (1/sqrt(n_data))
//            -> cyclic spectrum extension -> taps -> centered IDFT grid
// Receive:   FFT -> occupied bins -> matched filter (taps) -> fold extension
//            copies onto their source bins -> per-bin gain normalization
//            -> inverse precode -> minimum-distance detection
//
// Grid convention: the n_sk occupied subcarriers sit at signed frequencies
// f = k - n_sk/2 (k = 0..n_sk-1) of an M = n_fft * oversample point grid and
// land on index f mod M. The time signal is x[n] = IDFT_M(grid)[n] / sqrt(n_fft)
// with an unnormalized inverse sum, so every oversample-th sample of the
// oversampled block equals the critically sampled block exactly, and the
// time-domain energy equals oversample * (frequency-domain energy).

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tinyshape/types.hpp"

namespace tinyshape {

enum class Modulation { qpsk, qam16, qam64 };

int bits_per_symbol(Modulation m);
std::string_view to_string(Modulation m);
Modulation parse_modulation(std::string_view name);

/// Unit-average-energy Gray constellation (3GPP TS 38.211 bit order).
/// Entry i is the point for the label whose bits, MSB first, spell i.
const std::vector<cplx>& constellation(Modulation m);

struct ChainConfig {
  std::size_t n_data = 210;
  std::size_t n_se = 15;
  std::size_t n_fft = 256;
  std::size_t oversample = 4;
  double bandwidth_hz = 20e6;
  double scs_hz = 30e3;

  std::size_t n_sk() const noexcept { return n_data + 2 * n_se; }
  std::size_t grid_size() const noexcept { return n_fft * oversample; }

  /// Throws std::invalid_argument naming the violated field.
  void validate() const;

  /// Same chain without spectrum extension (conventional DFT-s-OFDM).
  ChainConfig without_extension() const {
    ChainConfig c = *this;
    c.n_se = 0;
    return c;
  }
};

enum class Stage {
  data_symbols,
  freq_domain,
  extended,
  shaped,
  time_domain,
  received,
  recovered_freq,
  matched,
};

std::string_view to_string(Stage s);

/// One OFDM block at a named pipeline stage. Operations check the stage and
/// length of their input and reject mismatches.
struct SymbolBlock {
  Stage stage = Stage::data_symbols;
  CVec values;
};

class EqualizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SymbolBlock map_bits(std::span<const std::uint8_t> bits, Modulation scheme);

/// Integer labels (0..order-1) of the symbols map_bits would produce.
std::vector<unsigned> labels_from_bits(std::span<const std::uint8_t> bits, Modulation scheme);

SymbolBlock dft_precode(const SymbolBlock& block, const ChainConfig& cfg);

/// Inverse of dft_precode: unitary IDFT back to data symbols.
SymbolBlock dft_deprecode(const SymbolBlock& block, const ChainConfig& cfg);

SymbolBlock spectrum_extend(const SymbolBlock& block, const ChainConfig& cfg);

SymbolBlock apply_filter(const SymbolBlock& block, std::span<const double> taps);

SymbolBlock to_time_domain(const SymbolBlock& block, const ChainConfig& cfg);

/// Grid index of occupied subcarrier k (0-based) for n_occupied bins on a grid of M points.
std::size_t occupied_bin(std::size_t k, std::size_t n_occupied, std::size_t grid) noexcept;

/// Data-symbol index that extended position p (0..n_sk-1) was copied from.
std::size_t extension_source(std::size_t p, const ChainConfig& cfg) noexcept;

/// FFT of a received (or time-domain) block, returning the n_sk occupied bins
/// scaled so that a noiseless block returns the shaped symbols exactly.
SymbolBlock recover_frequency(const SymbolBlock& rx, const ChainConfig& cfg);

/// Sum of taps^2 over all copies of each data bin (length n_data).
RVec fold_gains(std::span<const double> taps, const ChainConfig& cfg);

inline constexpr double kEqualizerEpsilon = 1e-12;

/// Matched filter, extension folding and per-bin normalization:
/// S_hat[d] = sum_c F_c Y_c / (sum_c F_c^2 + eps). Throws EqualizationError
/// when any data bin has zero total gain.
SymbolBlock fold_and_normalize(const SymbolBlock& recovered, std::span<const double> taps,
                               const ChainConfig& cfg);

/// Hard minimum-distance decisions; returns labels.
std::vector<unsigned> detect(std::span<const cplx> symbols, Modulation scheme);

struct ReceiverOutput {
  SymbolBlock detected;       ///< constellation points, stage data_symbols
  std::vector<unsigned> labels;
  CVec equalized;             ///< soft symbols before slicing
};

/// Full receiver. `fade` is the known flat channel gain; the block is divided
/// by it before the FFT.
ReceiverOutput receiver_chain(const SymbolBlock& rx, std::span<const double> taps,
                              const ChainConfig& cfg, Modulation scheme, cplx fade = {1.0, 0.0});

/// Convenience: bits -> shaped time-domain block for the given taps.
SymbolBlock transmit(std::span<const std::uint8_t> bits, Modulation scheme,
                     std::span<const double> taps, const ChainConfig& cfg);

}  // namespace tinyshape
