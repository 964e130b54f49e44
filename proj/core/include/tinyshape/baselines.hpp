#pragma once

// Comparison schemes: clipping-and-filtering (CLF) and selective mapping (SLM).
// RRC and plain DFT-s-OFDM are static tap profiles (see polyfilter).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tinyshape/signal_chain.hpp"
#include "tinyshape/types.hpp"

namespace tinyshape {

struct ClfConfig {
  double clip_ratio_db = 4.0;  ///< clip level over block RMS
  std::size_t iterations = 2;

  void validate() const;
};

struct ClipResult {
  SymbolBlock block;
  double level = 0.0;
  std::size_t clipped = 0;
};

/// Amplitude clipping at `level`, preserving phase.
ClipResult clip_stage(const SymbolBlock& block, double level);

/// Repeated clip (RMS * 10^(ratio/20), recomputed each pass) followed by
/// removal of every bin outside the n_occupied allocation. A pass that clips
/// nothing leaves the signal untouched.
SymbolBlock clf_transmit(const SymbolBlock& block, const ClfConfig& cfg, const ChainConfig& chain,
                         std::size_t n_occupied = 0);

struct SlmConfig {
  std::size_t num_candidates = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Candidate phase vectors over the n_data frequency-domain symbols, drawn
/// from {1, j, -1, -j}. Candidate 0 is all ones.
std::vector<CVec> slm_phase_vectors(const SlmConfig& cfg, std::size_t n_data);

struct SlmResult {
  SymbolBlock block;
  std::size_t index = 0;
  RVec candidate_papr_db;
};

/// Rotates the precoded symbols by each candidate, shapes with `taps` and
/// keeps the minimum-PAPR candidate (lowest index on ties).
SlmResult slm_transmit(const SymbolBlock& freq_block, std::span<const double> taps, const SlmConfig& cfg,
                       const ChainConfig& chain);

/// Same selection with precomputed phase vectors.
SlmResult slm_transmit(const SymbolBlock& freq_block, std::span<const double> taps,
                       std::span<const CVec> phases, const ChainConfig& chain);

/// Receiver for an SLM block given the signalled candidate's phases: folds,
/// normalizes, de-rotates, de-precodes and slices.
ReceiverOutput slm_receive(const SymbolBlock& rx, std::span<const double> taps, const ChainConfig& chain,
                           Modulation scheme, std::span<const cplx> phases, cplx fade = {1.0, 0.0});

}  // namespace tinyshape
