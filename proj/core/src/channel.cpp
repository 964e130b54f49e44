#include "tinyshape/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tinyshape/fft.hpp"
#include "tinyshape/rng.hpp"

namespace tinyshape {

std::string_view to_string(ChannelModel m) {
  switch (m) {
    case ChannelModel::awgn:
      return "awgn";
    case ChannelModel::rayleigh:
      return "rayleigh";
    case ChannelModel::rician:
      return "rician";
  }
  return "unknown";
}

ChannelModel parse_channel_model(std::string_view name) {
  if (name == "awgn") return ChannelModel::awgn;
  if (name == "rayleigh") return ChannelModel::rayleigh;
  if (name == "rician") return ChannelModel::rician;
  throw std::invalid_argument("unknown channel model '" + std::string(name) + "'");
}

void ChannelCfg::validate() const {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("channel.snr_db must be finite (or +inf to disable noise)");
  }
  if (model == ChannelModel::rician) {
    if (!k_factor_db) throw std::invalid_argument("channel.k_factor_db is required for the Rician model");
    if (!std::isfinite(*k_factor_db)) throw std::invalid_argument("channel.k_factor_db must be finite");
  }
}

bool ChannelCfg::noiseless() const noexcept { return snr_db == std::numeric_limits<double>::infinity(); }

double noise_variance_for(std::span<const cplx> signal, double snr_db, std::size_t n_occupied) {
  if (signal.empty() || n_occupied == 0) throw std::invalid_argument("noise_variance_for: empty signal");
  double power = 0.0;
  for (const auto& v : signal) power += std::norm(v);
  power /= static_cast<double>(signal.size());
  const double snr = std::pow(10.0, snr_db / 10.0);
  return power * static_cast<double>(signal.size()) / (static_cast<double>(n_occupied) * snr);
}

cplx draw_fade(const ChannelCfg& cfg, std::uint64_t block_index) {
  if (cfg.model == ChannelModel::awgn) return {1.0, 0.0};
  Rng rng = make_rng(cfg.seed, Stream::channel_fade, block_index);
  const cplx scatter = complex_normal(rng);
  if (cfg.model == ChannelModel::rayleigh) return scatter;
  const double k = std::pow(10.0, cfg.k_factor_db.value() / 10.0);
  return cplx{std::sqrt(k / (k + 1.0)), 0.0} + std::sqrt(1.0 / (k + 1.0)) * scatter;
}

ChannelOutput apply_channel(const SymbolBlock& signal, const ChannelCfg& cfg, const ChainConfig& chain,
                            std::uint64_t block_index, std::optional<std::size_t> n_occupied) {
  cfg.validate();
  if (signal.stage != Stage::time_domain) throw std::invalid_argument("apply_channel: expected a time-domain block");
  for (const auto& v : signal.values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw std::invalid_argument("apply_channel: non-finite input sample");
    }
  }
  ChannelOutput out;
  out.fade = draw_fade(cfg, block_index);
  out.received = SymbolBlock{Stage::received, signal.values};
  if (out.fade != cplx{1.0, 0.0}) {
    for (auto& v : out.received.values) v *= out.fade;
  }
  if (cfg.noiseless()) return out;

  out.noise_variance = noise_variance_for(signal.values, cfg.snr_db, n_occupied.value_or(chain.n_sk()));
  const double sigma = std::sqrt(out.noise_variance);
  Rng rng = make_rng(cfg.seed, Stream::channel_noise, block_index);
  double energy = 0.0;
  for (auto& v : out.received.values) {
    const cplx u = complex_normal(rng);
    energy += std::norm(u);
    v += sigma * u;
  }
  out.unit_noise_energy = energy;
  return out;
}

double estimate_snr(std::span<const SymbolBlock> rx_blocks, std::span<const SymbolBlock> truth,
                    const ChainConfig& chain, double cap_db) {
  if (rx_blocks.empty() || rx_blocks.size() != truth.size()) {
    throw std::invalid_argument("estimate_snr: need >= 1 matching (rx, truth) pair");
  }
  const std::size_t m = chain.grid_size();
  double signal = 0.0;
  double residual = 0.0;
  std::size_t n_occ = 0;
  for (std::size_t b = 0; b < rx_blocks.size(); ++b) {
    if (rx_blocks[b].values.size() != m || truth[b].values.size() != m) {
      throw std::invalid_argument("estimate_snr: block length mismatch");
    }
    CVec s = truth[b].values;
    CVec r(m);
    for (std::size_t i = 0; i < m; ++i) r[i] = rx_blocks[b].values[i] - truth[b].values[i];
    fft_plan(m).forward(s);
    fft_plan(m).forward(r);
    n_occ = chain.n_sk();
    for (std::size_t k = 0; k < n_occ; ++k) {
      const std::size_t idx = occupied_bin(k, n_occ, m);
      signal += std::norm(s[idx]);
      residual += std::norm(r[idx]);
    }
  }
  if (residual <= 0.0) return cap_db;
  return std::min(cap_db, 10.0 * std::log10(signal / residual));
}

}  // namespace tinyshape
