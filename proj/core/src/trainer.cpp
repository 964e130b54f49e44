#include "tinyshape/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "tinyshape/loss_metrics.hpp"
#include "tinyshape/parallel.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/rng.hpp"

namespace tinyshape {

namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i-- > 1;) {
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    if (j > i) j = i;
    std::swap(order[i], order[j]);
  }
  return order;
}

double snap(double v) { return static_cast<double>(static_cast<float>(v)); }

void snap_all(RVec& v) {
  for (auto& x : v) x = snap(x);
}

}  // namespace

void TrainConfig::validate() const {
  require(n_blocks > 0, "train.n_blocks must be > 0");
  require(batch_size > 0, "train.batch_size must be > 0");
  require(epochs > 0, "train.epochs must be > 0");
  require(adam.lr >= 0.0 && std::isfinite(adam.lr), "train.lr must be >= 0");
  require(adam.weight_decay >= 0.0, "train.weight_decay must be >= 0");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "train.beta1 must be in [0, 1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "train.beta2 must be in [0, 1)");
  require(adam.eps > 0.0, "train.eps must be > 0");
  require(std::isfinite(snr_lo_db) && std::isfinite(snr_hi_db) && snr_lo_db <= snr_hi_db,
          "train.snr_range_db must be an ordered finite pair");
  const double cm = channel_mix.awgn + channel_mix.rayleigh + channel_mix.rician;
  require(channel_mix.awgn >= 0.0 && channel_mix.rayleigh >= 0.0 && channel_mix.rician >= 0.0 &&
              std::abs(cm - 1.0) < 1e-9,
          "train.channel_mix weights must be >= 0 and sum to 1");
  require(std::isfinite(channel_mix.rician_k_db), "train.rician_k_db must be finite");
  const double mm = mod_mix.qpsk + mod_mix.qam16;
  require(mod_mix.qpsk >= 0.0 && mod_mix.qam16 >= 0.0 && std::abs(mm - 1.0) < 1e-9,
          "train.mod_mix weights must be >= 0 and sum to 1");
  require(n_coeffs > 0, "train.n_coeffs must be > 0");
  require(std::isfinite(x0_db), "train.x0_db must be finite");
  require(sharpness > 0.0, "train.sharpness must be > 0");
  require(grad_clip >= 0.0, "train.grad_clip must be >= 0");
  require(prune.per_epoch_fraction >= 0.0 && prune.per_epoch_fraction < 1.0,
          "train.prune.per_epoch_fraction must be in [0, 1)");
  require(prune.target_sparsity >= 0.0 && prune.target_sparsity < 1.0,
          "train.prune.target_sparsity must be in [0, 1)");
  require(prune.ramp_per_epoch > 0.0, "train.prune.ramp_per_epoch must be > 0");
}

std::string TrainConfig::canonical() const {
  return fmt::format(
      "n_blocks={};batch_size={};epochs={};lr={};wd={};beta1={};beta2={};eps={};prune_mode={};"
      "prune_fraction={};prune_target={};prune_ramp={};snr=[{},{}];mix=[{},{},{}];k_db={};mod=[{},{}];"
      "hidden={};n_coeffs={};x0={};sharpness={};grad_clip={};seed={}",
      n_blocks, batch_size, epochs, adam.lr, adam.weight_decay, adam.beta1, adam.beta2, adam.eps,
      prune.mode == PruneMode::target ? "target" : "per_epoch", prune.per_epoch_fraction, prune.target_sparsity,
      prune.ramp_per_epoch, snr_lo_db, snr_hi_db, channel_mix.awgn, channel_mix.rayleigh, channel_mix.rician,
      channel_mix.rician_k_db, mod_mix.qpsk, mod_mix.qam16, hidden_width, n_coeffs, x0_db, sharpness, grad_clip,
      seed);
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(canonical()); }

BlockDraw generate_block(const TrainConfig& config, const ChainConfig& chain, std::uint64_t block_index) {
  Rng rng = make_rng(config.seed, Stream::block_draw, block_index);
  BlockDraw d;
  d.index = block_index;
  d.channel.snr_db = config.snr_lo_db + (config.snr_hi_db - config.snr_lo_db) * uniform01(rng);
  const double uc = uniform01(rng);
  if (uc < config.channel_mix.awgn) {
    d.channel.model = ChannelModel::awgn;
  } else if (uc < config.channel_mix.awgn + config.channel_mix.rayleigh) {
    d.channel.model = ChannelModel::rayleigh;
  } else {
    d.channel.model = ChannelModel::rician;
    d.channel.k_factor_db = config.channel_mix.rician_k_db;
  }
  d.scheme = uniform01(rng) < config.mod_mix.qpsk ? Modulation::qpsk : Modulation::qam16;
  d.channel.seed = derive_seed(config.seed, Stream::channel_noise, 0);
  d.bits.resize(chain.n_data * static_cast<std::size_t>(bits_per_symbol(d.scheme)));
  for (auto& b : d.bits) b = static_cast<std::uint8_t>(rng() >> 63);
  return d;
}

BlockLoss block_loss(std::span<const double> coeffs, const SymbolBlock& s_data_freq, const BlockDraw& draw,
                     const ChainConfig& chain, const LossParams& lp) {
  const std::size_t n_sk = chain.n_sk();
  const std::size_t n_data = chain.n_data;
  const std::size_t m = chain.grid_size();
  const RVec taps = taps_from_coeffs(coeffs, n_sk);
  const SymbolBlock s_ext = spectrum_extend(s_data_freq, chain);
  const SymbolBlock x = to_time_domain(apply_filter(s_ext, taps), chain);

  BlockLoss out;
  out.papr_db = papr_db(x);
  std::size_t peak_idx = 0;
  double peak = -1.0;
  double energy = 0.0;
  for (std::size_t n = 0; n < m; ++n) {
    const double p = std::norm(x.values[n]);
    energy += p;
    if (p > peak) {
      peak = p;
      peak_idx = n;
    }
  }
  const double mean_power = energy / static_cast<double>(m);

  // Expected error over the noise draw. After genie fade compensation each
  // occupied bin carries noise of variance nu = Q / (n_sk * snr * |h|^2), so
  // e_d = (sum F_c w_c - eps S_d) / (G_d + eps) has
  // E|e_d|^2 = (nu G_d + eps^2 |S_d|^2) / (G_d + eps)^2.
  const cplx fade = draw_fade(draw.channel, draw.index);
  if (fade == cplx{0.0, 0.0}) throw EqualizationError("equalization failure: zero channel gain");
  double nu = 0.0;
  if (!draw.channel.noiseless()) {
    nu = noise_variance_for(x.values, draw.channel.snr_db, n_sk) * static_cast<double>(chain.n_fft) /
         (static_cast<double>(m) * std::norm(fade));
  }
  double q_total = 0.0;
  for (std::size_t c = 0; c < n_sk; ++c) q_total += taps[c] * taps[c] * std::norm(s_ext.values[c]);

  const RVec gains = fold_gains(taps, chain);
  RVec num(n_data);
  double mse = 0.0;
  double noise_coupling = 0.0;  // sum_d G_d / D_d^2
  for (std::size_t d = 0; d < n_data; ++d) {
    if (gains[d] == 0.0) {
      throw EqualizationError("equalization failure: zero effective gain on data bin " + std::to_string(d));
    }
    const double denom = gains[d] + kEqualizerEpsilon;
    num[d] = nu * gains[d] + kEqualizerEpsilon * kEqualizerEpsilon * std::norm(s_data_freq.values[d]);
    mse += num[d] / (denom * denom);
    noise_coupling += gains[d] / (denom * denom);
  }
  const double inv_n = 1.0 / static_cast<double>(n_data);
  mse *= inv_n;
  out.mse = mse;
  out.surrogate = softplus(out.papr_db - lp.x0_db, lp.sharpness);
  out.loss = total_loss(out.mse, out.surrogate, lp.lambda);

  const double dsp = sigmoid(out.papr_db - lp.x0_db, lp.sharpness);
  const double inv_sqrt_nfft = 1.0 / std::sqrt(static_cast<double>(chain.n_fft));
  const cplx x_peak = x.values[peak_idx];
  out.grad_taps.assign(n_sk, 0.0);
  for (std::size_t k = 0; k < n_sk; ++k) {
    const std::size_t d = extension_source(k, chain);
    const double denom = gains[d] + kEqualizerEpsilon;
    const double sk2 = std::norm(s_ext.values[k]);

    double dmse = 0.0;
    if (q_total > 0.0) dmse += noise_coupling * nu * taps[k] * sk2 / q_total;
    dmse += taps[k] * (nu / (denom * denom) - 2.0 * num[d] / (denom * denom * denom));
    dmse *= 2.0 * inv_n;

    const std::size_t bin = occupied_bin(k, n_sk, m);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>((bin * peak_idx) % m) / static_cast<double>(m);
    const cplx dx = s_ext.values[k] * std::polar(inv_sqrt_nfft, angle);
    const double dpeak = 2.0 * std::real(std::conj(x_peak) * dx);
    const double dmean = 2.0 * taps[k] * sk2 / static_cast<double>(chain.n_fft);
    const double dpapr = kDbPerNeper * (dpeak / peak - dmean / mean_power);

    out.grad_taps[k] = dmse + lp.lambda * dsp * dpapr;
  }

  const RVec basis = tap_basis(n_sk, coeffs.size());
  out.grad_coeffs.assign(coeffs.size(), 0.0);
  for (std::size_t k = 0; k < n_sk; ++k) {
    for (std::size_t z = 0; z < coeffs.size(); ++z) out.grad_coeffs[z] += out.grad_taps[k] * basis[k * coeffs.size() + z];
  }
  return out;
}

NetBlockResult net_block_loss(const NetParams& params, const BlockDraw& draw, const ChainConfig& chain,
                              const LossParams& lp) {
  const SymbolBlock s_freq = dft_precode(map_bits(draw.bits, draw.scheme), chain);
  const SymbolBlock s_ext = spectrum_extend(s_freq, chain);
  const RVec input = build_input(s_ext, draw.channel.snr_db, chain.n_sk());
  ForwardCache cache;
  const RVec coeffs = forward(params, input, &cache);
  NetBlockResult r;
  r.loss = block_loss(coeffs, s_freq, draw, chain, lp);
  r.grads = backward(params, cache, r.loss.grad_coeffs);
  return r;
}

void snap_to_float32(NetParams& params, OptState& opt) {
  for (auto& l : params.layers) {
    snap_all(l.weights);
    snap_all(l.bias);
  }
  params.apply_masks();
  for (std::size_t l = 0; l < opt.m_weights.size(); ++l) {
    snap_all(opt.m_weights[l]);
    snap_all(opt.v_weights[l]);
    snap_all(opt.m_bias[l]);
    snap_all(opt.v_bias[l]);
  }
  opt.config.lr = snap(opt.config.lr);
  opt.config.weight_decay = snap(opt.config.weight_decay);
  opt.config.beta1 = snap(opt.config.beta1);
  opt.config.beta2 = snap(opt.config.beta2);
  opt.config.eps = snap(opt.config.eps);
}

TrainResult train(const TrainConfig& config, const ChainConfig& chain) {
  config.validate();
  chain.validate();
  if (chain.n_se == 0 && chain.n_sk() < 2) throw std::invalid_argument("train: chain too small");

  const NetShape shape{chain.n_sk() + 1, config.hidden_width, config.n_coeffs};
  NetParams params = NetParams::init(shape, config.seed);
  OptState opt = OptState::for_params(params, config.adam);
  const unsigned threads = resolve_threads(config.threads);
  const LambdaTable table;
  const auto t_start = std::chrono::steady_clock::now();

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(config.seed, Stream::shuffle, epoch);
    const auto order = permutation(config.n_blocks, shuffle_rng);
    RVec batch_losses;
    double loss_sum = 0.0;
    double mse_sum = 0.0;
    double tail_sum = 0.0;

    for (std::size_t start = 0; start < config.n_blocks; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, config.n_blocks - start);
      std::vector<NetBlockResult> slots(count);
      parallel_for(count, threads, [&](std::size_t i) {
        const auto draw = generate_block(config, chain, order[start + i]);
        const LossParams lp{lookup_lambda(table, draw.channel.snr_db), config.x0_db, config.sharpness};
        try {
          slots[i] = net_block_loss(params, draw, chain, lp);
        } catch (const std::exception& e) {
          throw TrainingError(fmt::format("epoch {} block {}: {} (parameter norm {}, live weights {})", epoch,
                                          draw.index, e.what(), params.weight_norm(), params.live_weight_count()));
        }
      });

      NetGradients total = NetGradients::zeros_like(params);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const auto& s = slots[i];
        if (!std::isfinite(s.loss.loss) || !std::isfinite(s.grads.norm())) {
          throw TrainingError(fmt::format(
              "non-finite loss at epoch {} block {} (loss {}, mse {}, papr {} dB, parameter norm {}, "
              "live weights {})",
              epoch, order[start + i], s.loss.loss, s.loss.mse, s.loss.papr_db, params.weight_norm(),
              params.live_weight_count()));
        }
        total.add(s.grads);
        batch_loss += s.loss.loss;
        loss_sum += s.loss.loss;
        mse_sum += s.loss.mse;
        tail_sum += s.loss.surrogate;
      }
      const double inv = 1.0 / static_cast<double>(count);
      total.scale(inv);
      if (config.grad_clip > 0.0) {
        const double norm = total.norm();
        if (norm > config.grad_clip) total.scale(config.grad_clip / norm);
      }
      adamw_step(params, total, opt);
      batch_losses.push_back(batch_loss * inv);
    }

    if (config.prune.mode == PruneMode::per_epoch) {
      if (config.prune.per_epoch_fraction > 0.0) prune_step(params, config.prune.per_epoch_fraction);
    } else if (config.prune.target_sparsity > 0.0) {
      double s = std::min(config.prune.target_sparsity, config.prune.ramp_per_epoch * static_cast<double>(epoch));
      if (epoch == config.epochs) s = config.prune.target_sparsity;
      prune_to(params, s);
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const auto& mask = params.layers[l].mask;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) opt.m_weights[l][i] = opt.v_weights[l][i] = 0.0;
      }
    }

    const auto n = static_cast<double>(config.n_blocks);
    HistoryRow row;
    row.epoch = static_cast<std::uint32_t>(epoch);
    row.mean_loss = loss_sum / n;
    row.mse_term = mse_sum / n;
    row.tail_term = tail_sum / n;
    row.sparsity = params.sparsity();
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.checkpoint.history.push_back(row);
    result.batch_losses.push_back(std::move(batch_losses));
  }

  snap_to_float32(params, opt);
  // Scales come out float32-exact: w_max is a float32 weight and the bias
  // scale is a power-of-two division of a float32 bias.
  QuantizedNet qnet = quantize(params);
  auto& ck = result.checkpoint;
  ck.params = std::move(params);
  ck.qnet = std::move(qnet);
  ck.opt = std::move(opt);
  ck.config_hash = config.hash();
  ck.epoch = static_cast<std::uint32_t>(config.epochs);
  return result;
}

}  // namespace tinyshape
