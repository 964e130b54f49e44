#include "tinyshape/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tinyshape/rng.hpp"

namespace tinyshape {

namespace {

// Output-layer weights start at 1% of the Glorot range so the initial filter
// is the all-ones profile set by the output bias. Full-range weights give
// near-zero taps on some blocks and a divergent first epoch.
constexpr double kOutputInitGain = 0.01;

struct PooledIndex {
  std::size_t layer;
  std::size_t index;
};

std::vector<PooledIndex> live_indices(const NetParams& params) {
  std::vector<PooledIndex> out;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      if (layer.mask[i]) out.push_back({l, i});
    }
  }
  return out;
}

std::size_t mask_smallest(NetParams& params, std::size_t count) {
  auto live = live_indices(params);
  std::stable_sort(live.begin(), live.end(), [&](const PooledIndex& a, const PooledIndex& b) {
    return std::abs(params.layers[a.layer].weights[a.index]) < std::abs(params.layers[b.layer].weights[b.index]);
  });
  count = std::min(count, live.size());
  for (std::size_t i = 0; i < count; ++i) {
    auto& layer = params.layers[live[i].layer];
    layer.mask[live[i].index] = 0;
    layer.weights[live[i].index] = 0.0;
  }
  return count;
}

void dense_forward(std::span<const double> w, std::span<const std::uint8_t> mask, std::span<const double> b,
                   std::size_t rows, std::size_t cols, std::span<const double> x, RVec& y) {
  y.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const std::size_t base = r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += (mask[base + c] ? w[base + c] : 0.0) * x[c];
    y[r] = acc;
  }
}

}  // namespace

DenseLayer::DenseLayer(std::size_t r, std::size_t c)
    : rows(r), cols(c), weights(r * c, 0.0), bias(r, 0.0), mask(r * c, 1) {}

std::size_t DenseLayer::live_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

NetParams NetParams::init(const NetShape& shape, std::uint64_t seed) {
  if (shape.input == 0 || shape.output == 0) throw std::invalid_argument("NetParams::init: empty shape");
  NetParams p;
  if (shape.hidden > 0) {
    p.layers.emplace_back(shape.hidden, shape.input);
    p.layers.emplace_back(shape.output, shape.hidden);
  } else {
    p.layers.emplace_back(shape.output, shape.input);
  }
  Rng rng = make_rng(seed, Stream::net_init, 0);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    double limit = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
    if (l + 1 == p.layers.size()) limit *= kOutputInitGain;
    for (auto& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  p.layers.back().bias[0] = 1.0;
  return p;
}

NetShape NetParams::shape() const {
  NetShape s;
  s.input = layers.front().cols;
  s.output = layers.back().rows;
  s.hidden = layers.size() > 1 ? layers.front().rows : 0;
  return s;
}

std::size_t NetParams::hidden_width() const noexcept { return layers.size() > 1 ? layers.front().rows : 0; }

std::size_t NetParams::weight_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size();
  return n;
}

std::size_t NetParams::live_weight_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.live_count();
  return n;
}

double NetParams::sparsity() const noexcept {
  const auto total = weight_count();
  return total == 0 ? 0.0 : 1.0 - static_cast<double>(live_weight_count()) / static_cast<double>(total);
}

double NetParams::weight_norm() const noexcept {
  double s = 0.0;
  for (const auto& l : layers) {
    for (double w : l.weights) s += w * w;
    for (double b : l.bias) s += b * b;
  }
  return std::sqrt(s);
}

void NetParams::apply_masks() noexcept {
  for (auto& l : layers) {
    for (std::size_t i = 0; i < l.weights.size(); ++i) {
      if (!l.mask[i]) l.weights[i] = 0.0;
    }
  }
}

RVec build_input(const SymbolBlock& s_ext, double snr_db, std::size_t expected_length) {
  if (s_ext.values.size() != expected_length) {
    throw std::invalid_argument("build_input: expected " + std::to_string(expected_length) +
                                " extended symbols, got " + std::to_string(s_ext.values.size()));
  }
  if (!std::isfinite(snr_db)) throw std::invalid_argument("build_input: snr must be finite");
  RVec x(expected_length + 1);
  for (std::size_t k = 0; k < expected_length; ++k) x[k] = std::abs(s_ext.values[k]);
  x[expected_length] = snr_db / 20.0;
  return x;
}

RVec forward(const NetParams& params, std::span<const double> input, ForwardCache* cache) {
  if (params.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (input.size() != params.layers.front().cols) {
    throw std::invalid_argument("forward: input length " + std::to_string(input.size()) + " != " +
                                std::to_string(params.layers.front().cols));
  }
  if (cache) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  RVec x(input.begin(), input.end());
  RVec y;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    dense_forward(layer.weights, layer.mask, layer.bias, layer.rows, layer.cols, x, y);
    if (cache) {
      cache->inputs.push_back(x);
      cache->preactivations.push_back(y);
    }
    if (l + 1 < params.layers.size()) {
      for (auto& v : y) v = v > 0.0 ? v : 0.0;
    }
    x.swap(y);
  }
  return x;
}

NetGradients NetGradients::zeros_like(const NetParams& params) {
  NetGradients g;
  for (const auto& l : params.layers) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  g.input.assign(params.layers.front().cols, 0.0);
  return g;
}

void NetGradients::add(const NetGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += other.bias[l][i];
  }
  for (std::size_t i = 0; i < input.size(); ++i) input[i] += other.input[i];
}

void NetGradients::scale(double s) {
  for (auto& w : weights)
    for (auto& v : w) v *= s;
  for (auto& b : bias)
    for (auto& v : b) v *= s;
  for (auto& v : input) v *= s;
}

double NetGradients::norm() const noexcept {
  double s = 0.0;
  for (const auto& w : weights)
    for (double v : w) s += v * v;
  for (const auto& b : bias)
    for (double v : b) s += v * v;
  return std::sqrt(s);
}

NetGradients backward(const NetParams& params, const ForwardCache& cache, std::span<const double> upstream) {
  const std::size_t n_layers = params.layers.size();
  if (cache.inputs.size() != n_layers) throw std::invalid_argument("backward: forward cache missing");
  if (upstream.size() != params.layers.back().rows) throw std::invalid_argument("backward: upstream length mismatch");

  NetGradients g = NetGradients::zeros_like(params);
  RVec delta(upstream.begin(), upstream.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& x = cache.inputs[l];
    if (l + 1 < n_layers) {
      const auto& pre = cache.preactivations[l];
      for (std::size_t r = 0; r < layer.rows; ++r) {
        if (!(pre[r] > 0.0)) delta[r] = 0.0;
      }
    }
    auto& gw = g.weights[l];
    for (std::size_t r = 0; r < layer.rows; ++r) {
      g.bias[l][r] = delta[r];
      const std::size_t base = r * layer.cols;
      for (std::size_t c = 0; c < layer.cols; ++c) gw[base + c] = layer.mask[base + c] ? delta[r] * x[c] : 0.0;
    }
    RVec down(layer.cols, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const std::size_t base = r * layer.cols;
      for (std::size_t c = 0; c < layer.cols; ++c) {
        if (layer.mask[base + c]) down[c] += layer.weights[base + c] * delta[r];
      }
    }
    delta.swap(down);
  }
  g.input = std::move(delta);
  return g;
}

OptState OptState::for_params(const NetParams& params, const AdamWConfig& config) {
  OptState s;
  s.config = config;
  for (const auto& l : params.layers) {
    s.m_weights.emplace_back(l.weights.size(), 0.0);
    s.v_weights.emplace_back(l.weights.size(), 0.0);
    s.m_bias.emplace_back(l.bias.size(), 0.0);
    s.v_bias.emplace_back(l.bias.size(), 0.0);
  }
  return s;
}

void adamw_step(NetParams& params, const NetGradients& grads, OptState& opt) {
  if (grads.weights.size() != params.layers.size() || opt.m_weights.size() != params.layers.size()) {
    throw std::invalid_argument("adamw_step: shape mismatch");
  }
  const auto& c = opt.config;
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](double& p, double g, double& m, double& v, bool decay) {
    if (decay) p -= c.lr * c.weight_decay * p;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    p -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  };

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      if (!layer.mask[i]) continue;
      update(layer.weights[i], grads.weights[l][i], opt.m_weights[l][i], opt.v_weights[l][i], true);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      update(layer.bias[i], grads.bias[l][i], opt.m_bias[l][i], opt.v_bias[l][i], false);
    }
  }
  params.apply_masks();
}

std::size_t prune_step(NetParams& params, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("prune_step: fraction must be in (0, 1)");
  const std::size_t live = params.live_weight_count();
  const auto keep = static_cast<std::size_t>(std::floor(static_cast<double>(live) * (1.0 - fraction) + 1e-9));
  if (keep == 0) throw std::invalid_argument("prune_step: fraction would mask every weight");
  return mask_smallest(params, live - keep);
}

std::size_t prune_to(NetParams& params, double target_sparsity) {
  if (!(target_sparsity >= 0.0 && target_sparsity < 1.0)) {
    throw std::invalid_argument("prune_to: target sparsity must be in [0, 1)");
  }
  const std::size_t total = params.weight_count();
  const auto keep =
      static_cast<std::size_t>(std::floor(static_cast<double>(total) * (1.0 - target_sparsity) + 1e-9));
  if (keep == 0) throw std::invalid_argument("prune_to: target would mask every weight");
  const std::size_t live = params.live_weight_count();
  if (live <= keep) return 0;
  return mask_smallest(params, live - keep);
}

std::int8_t quantize_weight(double w, double w_max) noexcept {
  const double q = std::round(w * 127.0 / w_max);
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

double dequantize_weight(std::int8_t q, double w_max) noexcept { return static_cast<double>(q) * w_max / 127.0; }

QuantizedNet quantize(const NetParams& params) {
  QuantizedNet qnet;
  for (const auto& layer : params.layers) {
    for (double w : layer.weights) {
      if (!std::isfinite(w)) throw std::invalid_argument("quantize: non-finite weight");
    }
    QuantizedLayer q;
    q.rows = layer.rows;
    q.cols = layer.cols;
    double w_max = 0.0;
    for (double w : layer.weights) w_max = std::max(w_max, std::abs(w));
    q.w_max = w_max > 0.0 ? w_max : 1.0;
    q.weights.resize(layer.weights.size());
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      q.weights[i] = layer.mask[i] ? quantize_weight(layer.weights[i], q.w_max) : std::int8_t{0};
    }
    double b_max = 0.0;
    for (double b : layer.bias) b_max = std::max(b_max, std::abs(b));
    q.bias_scale = b_max > 0.0 ? b_max / kBiasQuantSteps : 1.0;
    q.bias.resize(layer.bias.size());
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      q.bias[i] = static_cast<std::int32_t>(std::lround(layer.bias[i] / q.bias_scale));
    }
    qnet.layers.push_back(std::move(q));
  }
  return qnet;
}

NetParams dequantize(const QuantizedNet& qnet) {
  NetParams p;
  for (const auto& q : qnet.layers) {
    DenseLayer layer(q.rows, q.cols);
    for (std::size_t i = 0; i < q.weights.size(); ++i) {
      layer.weights[i] = dequantize_weight(q.weights[i], q.w_max);
      layer.mask[i] = q.weights[i] != 0 ? 1 : 0;
    }
    for (std::size_t i = 0; i < q.bias.size(); ++i) layer.bias[i] = static_cast<double>(q.bias[i]) * q.bias_scale;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

RVec forward_q(const QuantizedNet& qnet, std::span<const double> input) { return forward(dequantize(qnet), input); }

RVec InferenceNet::operator()(std::span<const double> input) const {
  if (const auto* p = std::get_if<NetParams>(&net_)) return forward(*p, input);
  return forward_q(std::get<QuantizedNet>(net_), input);
}

}  // namespace tinyshape
