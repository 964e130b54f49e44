#pragma once

// Checkpoint file, all values little-endian:
//
//   "TSCK"  u32 version(=1)  u32 hidden_width  u32 n_coeffs  u32 input_dim
//   u32 n_layers
//   per layer:     u32 rows  u32 cols  f32 weights[rows*cols]  f32 bias[rows]
//                  u8 mask[ceil(rows*cols/8)]   (bit i = weight i, LSB first)
//   per layer:     f32 w_max  i8 q[rows*cols]  f32 bias_scale  i32 qbias[rows]
//   optimizer:     f32 lr wd beta1 beta2 eps  u64 step
//                  per layer: f32 m_w[] v_w[] m_b[] v_b[]
//   u64 config_hash  u32 epoch
//   u32 n_history, then per row f64 epoch mean_loss mse_term tail_term sparsity
//
// Parameters are stored as float32; checkpoints produced by train() are
// already float32-exact, so save/load round-trips bit-exactly.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tinyshape/tinynet.hpp"

namespace tinyshape {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct HistoryRow {
  std::uint32_t epoch = 0;
  double mean_loss = 0.0;
  double mse_term = 0.0;
  double tail_term = 0.0;
  double sparsity = 0.0;
  double wall_seconds = 0.0;  ///< not stored in the checkpoint
};

struct Checkpoint {
  NetParams params;
  QuantizedNet qnet;
  OptState opt;
  std::uint64_t config_hash = 0;
  std::uint32_t epoch = 0;
  std::vector<HistoryRow> history;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace tinyshape
