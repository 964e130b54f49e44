#pragma once

#include <cstdint>
#include <random>

#include "tinyshape/types.hpp"

namespace tinyshape {

using Rng = std::mt19937_64;

/// Named sub-streams. Every random quantity in the library is drawn from a
/// generator seeded by (master seed, stream, index), so results never depend
/// on evaluation order or thread count.
enum class Stream : std::uint64_t {
  data_bits = 1,
  channel_noise = 2,
  channel_fade = 3,
  block_draw = 4,
  net_init = 5,
  shuffle = 6,
  slm_phases = 7,
  traffic = 8,
  eval_cell = 9,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index) {
  return Rng(derive_seed(master, stream, index));
}

/// Circularly-symmetric complex Gaussian with unit variance, CN(0, 1).
cplx complex_normal(Rng& rng);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
double uniform01(Rng& rng) noexcept;

}  // namespace tinyshape
