#pragma once

// Tiny fully connected network mapping (|S_ext|, SNR) to polynomial filter
// coefficients. Default shape 241 -> 10 (ReLU) -> 5 (linear); hidden width 0
// gives a single linear layer (perceptron).

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "tinyshape/signal_chain.hpp"
#include "tinyshape/types.hpp"

namespace tinyshape {

struct NetShape {
  std::size_t input = 241;
  std::size_t hidden = 10;  ///< 0 = perceptron (no hidden layer)
  std::size_t output = 5;
};

/// Row-major dense layer: y = (W .* mask) x + b.
struct DenseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  RVec weights;
  RVec bias;
  std::vector<std::uint8_t> mask;  ///< 1 = live, 0 = pruned

  DenseLayer() = default;
  DenseLayer(std::size_t r, std::size_t c);

  std::size_t live_count() const noexcept;
};

struct NetParams {
  std::vector<DenseLayer> layers;

  static NetParams init(const NetShape& shape, std::uint64_t seed);

  NetShape shape() const;
  std::size_t hidden_width() const noexcept;
  std::size_t weight_count() const noexcept;
  std::size_t live_weight_count() const noexcept;
  double sparsity() const noexcept;
  double weight_norm() const noexcept;
  void apply_masks() noexcept;
};

/// Input features: [|S_ext_1|, ..., |S_ext_n|, snr_db / 20].
RVec build_input(const SymbolBlock& s_ext, double snr_db, std::size_t expected_length = 240);

struct ForwardCache {
  std::vector<RVec> inputs;          ///< input to each layer
  std::vector<RVec> preactivations;  ///< W x + b of each layer
};

RVec forward(const NetParams& params, std::span<const double> input, ForwardCache* cache = nullptr);

/// Gradients shaped like NetParams, plus d/d input.
struct NetGradients {
  std::vector<RVec> weights;
  std::vector<RVec> bias;
  RVec input;

  static NetGradients zeros_like(const NetParams& params);
  void add(const NetGradients& other);
  void scale(double s);
  double norm() const noexcept;
};

/// Reverse-mode gradients for the cached forward pass; masked weights get 0.
NetGradients backward(const NetParams& params, const ForwardCache& cache, std::span<const double> upstream);

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<RVec> m_weights, v_weights, m_bias, v_bias;

  static OptState for_params(const NetParams& params, const AdamWConfig& config);
};

/// Decoupled weight decay (weights only) + bias-corrected Adam update;
/// masks are re-applied afterwards.
void adamw_step(NetParams& params, const NetGradients& grads, OptState& opt);

/// Masks the `fraction` smallest-|w| live weights, pooled over all layers;
/// live count becomes floor(live * (1 - fraction)). Ties break in
/// (layer, row, col) order. Returns the number newly masked.
std::size_t prune_step(NetParams& params, double fraction);

/// Prunes until exactly floor(total * (1 - target_sparsity)) weights are live.
std::size_t prune_to(NetParams& params, double target_sparsity);

/// Symmetric per-tensor int8 weights with scale w_max/127 and int32 biases
/// with scale max|b| / 2^23.
struct QuantizedLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> weights;
  double w_max = 1.0;
  std::vector<std::int32_t> bias;
  double bias_scale = 1.0;
};

struct QuantizedNet {
  std::vector<QuantizedLayer> layers;
};

inline constexpr double kBiasQuantSteps = 8388608.0;  // 2^23

std::int8_t quantize_weight(double w, double w_max) noexcept;
double dequantize_weight(std::int8_t q, double w_max) noexcept;

QuantizedNet quantize(const NetParams& params);

/// Dequantizes into a float network (masks from zero weights).
NetParams dequantize(const QuantizedNet& qnet);

/// Weight-only quantized inference: dequantized weights, real activations.
RVec forward_q(const QuantizedNet& qnet, std::span<const double> input);

/// Either a float or a quantized network, as used at inference time.
class InferenceNet {
 public:
  explicit InferenceNet(NetParams params) : net_(std::move(params)) {}
  explicit InferenceNet(QuantizedNet qnet) : net_(std::move(qnet)) {}

  RVec operator()(std::span<const double> input) const;
  bool quantized() const noexcept { return std::holds_alternative<QuantizedNet>(net_); }

 private:
  std::variant<NetParams, QuantizedNet> net_;
};

}  // namespace tinyshape
