#include "tinyshape/signal_chain.hpp"

#include <cmath>
#include <limits>

#include "tinyshape/fft.hpp"

namespace tinyshape {

namespace {

void require_stage(const SymbolBlock& b, Stage expected, const char* op) {
  if (b.stage != expected) {
    throw std::invalid_argument(std::string(op) + ": expected stage " + std::string(to_string(expected)) +
                                ", got " + std::string(to_string(b.stage)));
  }
}

void require_length(std::size_t got, std::size_t expected, const char* op) {
  if (got != expected) {
    throw std::invalid_argument(std::string(op) + ": expected length " + std::to_string(expected) + ", got " +
                                std::to_string(got));
  }
}

std::vector<cplx> build_constellation(Modulation m) {
  const int bits = bits_per_symbol(m);
  const std::size_t order = std::size_t{1} << bits;
  std::vector<cplx> pts(order);
  for (std::size_t label = 0; label < order; ++label) {
    auto b = [&](int i) { return 1.0 - 2.0 * static_cast<double>((label >> (bits - 1 - i)) & 1U); };
    switch (m) {
      case Modulation::qpsk:
        pts[label] = cplx{b(0), b(1)} / std::sqrt(2.0);
        break;
      case Modulation::qam16:
        pts[label] = cplx{b(0) * (2.0 - b(2)), b(1) * (2.0 - b(3))} / std::sqrt(10.0);
        break;
      case Modulation::qam64:
        pts[label] = cplx{b(0) * (4.0 - b(2) * (2.0 - b(4))), b(1) * (4.0 - b(3) * (2.0 - b(5)))} /
                     std::sqrt(42.0);
        break;
    }
  }
  return pts;
}

}  // namespace

int bits_per_symbol(Modulation m) {
  switch (m) {
    case Modulation::qpsk:
      return 2;
    case Modulation::qam16:
      return 4;
    case Modulation::qam64:
      return 6;
  }
  throw std::invalid_argument("bits_per_symbol: unknown modulation");
}

std::string_view to_string(Modulation m) {
  switch (m) {
    case Modulation::qpsk:
      return "qpsk";
    case Modulation::qam16:
      return "qam16";
    case Modulation::qam64:
      return "qam64";
  }
  return "unknown";
}

Modulation parse_modulation(std::string_view name) {
  if (name == "qpsk") return Modulation::qpsk;
  if (name == "qam16" || name == "16qam") return Modulation::qam16;
  if (name == "qam64" || name == "64qam") return Modulation::qam64;
  throw std::invalid_argument("unknown modulation '" + std::string(name) + "'");
}

const std::vector<cplx>& constellation(Modulation m) {
  static const std::vector<cplx> qpsk = build_constellation(Modulation::qpsk);
  static const std::vector<cplx> qam16 = build_constellation(Modulation::qam16);
  static const std::vector<cplx> qam64 = build_constellation(Modulation::qam64);
  switch (m) {
    case Modulation::qpsk:
      return qpsk;
    case Modulation::qam16:
      return qam16;
    case Modulation::qam64:
      return qam64;
  }
  throw std::invalid_argument("constellation: unknown modulation");
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::data_symbols:
      return "data_symbols";
    case Stage::freq_domain:
      return "freq_domain";
    case Stage::extended:
      return "extended";
    case Stage::shaped:
      return "shaped";
    case Stage::time_domain:
      return "time_domain";
    case Stage::received:
      return "received";
    case Stage::recovered_freq:
      return "recovered_freq";
    case Stage::matched:
      return "matched";
  }
  return "unknown";
}

void ChainConfig::validate() const {
  if (n_data == 0) throw std::invalid_argument("chain.n_data must be > 0");
  if (n_fft == 0) throw std::invalid_argument("chain.n_fft must be > 0");
  if (oversample == 0) throw std::invalid_argument("chain.oversample must be >= 1");
  if (n_se >= n_data) throw std::invalid_argument("chain.n_se must be < n_data");
  if (n_sk() > n_fft) throw std::invalid_argument("chain.n_fft must be >= n_data + 2*n_se");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("chain.bandwidth_hz must be > 0");
  if (!(scs_hz > 0.0)) throw std::invalid_argument("chain.scs_hz must be > 0");
}

std::vector<unsigned> labels_from_bits(std::span<const std::uint8_t> bits, Modulation scheme) {
  const auto bps = static_cast<std::size_t>(bits_per_symbol(scheme));
  if (bits.size() % bps != 0) {
    throw std::invalid_argument("map_bits: bit count " + std::to_string(bits.size()) +
                                " not divisible by bits per symbol " + std::to_string(bps));
  }
  std::vector<unsigned> labels(bits.size() / bps);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    unsigned label = 0;
    for (std::size_t b = 0; b < bps; ++b) label = (label << 1) | (bits[i * bps + b] & 1U);
    labels[i] = label;
  }
  return labels;
}

SymbolBlock map_bits(std::span<const std::uint8_t> bits, Modulation scheme) {
  const auto labels = labels_from_bits(bits, scheme);
  const auto& pts = constellation(scheme);
  SymbolBlock out{Stage::data_symbols, CVec(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) out.values[i] = pts[labels[i]];
  return out;
}

SymbolBlock dft_precode(const SymbolBlock& block, const ChainConfig& cfg) {
  require_stage(block, Stage::data_symbols, "dft_precode");
  require_length(block.values.size(), cfg.n_data, "dft_precode");
  SymbolBlock out{Stage::freq_domain, block.values};
  fft_plan(cfg.n_data).forward(out.values);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_data));
  for (auto& v : out.values) v *= scale;
  return out;
}

SymbolBlock dft_deprecode(const SymbolBlock& block, const ChainConfig& cfg) {
  require_stage(block, Stage::freq_domain, "dft_deprecode");
  require_length(block.values.size(), cfg.n_data, "dft_deprecode");
  SymbolBlock out{Stage::data_symbols, block.values};
  fft_plan(cfg.n_data).inverse(out.values);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_data));
  for (auto& v : out.values) v *= scale;
  return out;
}

SymbolBlock spectrum_extend(const SymbolBlock& block, const ChainConfig& cfg) {
  require_stage(block, Stage::freq_domain, "spectrum_extend");
  require_length(block.values.size(), cfg.n_data, "spectrum_extend");
  if (cfg.n_se >= cfg.n_data) throw std::invalid_argument("spectrum_extend: n_se must be < n_data");
  SymbolBlock out{Stage::extended, CVec(cfg.n_sk())};
  for (std::size_t p = 0; p < out.values.size(); ++p) out.values[p] = block.values[extension_source(p, cfg)];
  return out;
}

std::size_t extension_source(std::size_t p, const ChainConfig& cfg) noexcept {
  if (p < cfg.n_se) return cfg.n_data - cfg.n_se + p;
  if (p < cfg.n_se + cfg.n_data) return p - cfg.n_se;
  return p - cfg.n_se - cfg.n_data;
}

SymbolBlock apply_filter(const SymbolBlock& block, std::span<const double> taps) {
  require_stage(block, Stage::extended, "apply_filter");
  require_length(taps.size(), block.values.size(), "apply_filter (taps)");
  SymbolBlock out{Stage::shaped, block.values};
  for (std::size_t k = 0; k < taps.size(); ++k) out.values[k] *= taps[k];
  return out;
}

std::size_t occupied_bin(std::size_t k, std::size_t n_occupied, std::size_t grid) noexcept {
  const auto f = static_cast<long long>(k) - static_cast<long long>(n_occupied / 2);
  const auto m = static_cast<long long>(grid);
  return static_cast<std::size_t>(((f % m) + m) % m);
}

SymbolBlock to_time_domain(const SymbolBlock& block, const ChainConfig& cfg) {
  require_stage(block, Stage::shaped, "to_time_domain");
  const std::size_t n_occ = block.values.size();
  if (n_occ > cfg.n_fft) throw std::invalid_argument("to_time_domain: occupied bins exceed n_fft");
  const std::size_t m = cfg.grid_size();
  SymbolBlock out{Stage::time_domain, CVec(m, cplx{0.0, 0.0})};
  for (std::size_t k = 0; k < n_occ; ++k) out.values[occupied_bin(k, n_occ, m)] = block.values[k];
  fft_plan(m).inverse(out.values);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_fft));
  for (auto& v : out.values) v *= scale;
  return out;
}

SymbolBlock recover_frequency(const SymbolBlock& rx, const ChainConfig& cfg) {
  if (rx.stage != Stage::received && rx.stage != Stage::time_domain) {
    throw std::invalid_argument("recover_frequency: expected a received or time-domain block");
  }
  const std::size_t m = cfg.grid_size();
  require_length(rx.values.size(), m, "recover_frequency");
  CVec grid = rx.values;
  fft_plan(m).forward(grid);
  const double scale = std::sqrt(static_cast<double>(cfg.n_fft)) / static_cast<double>(m);
  const std::size_t n_sk = cfg.n_sk();
  SymbolBlock out{Stage::recovered_freq, CVec(n_sk)};
  for (std::size_t k = 0; k < n_sk; ++k) out.values[k] = grid[occupied_bin(k, n_sk, m)] * scale;
  return out;
}

RVec fold_gains(std::span<const double> taps, const ChainConfig& cfg) {
  require_length(taps.size(), cfg.n_sk(), "fold_gains");
  RVec g(cfg.n_data, 0.0);
  for (std::size_t p = 0; p < taps.size(); ++p) g[extension_source(p, cfg)] += taps[p] * taps[p];
  return g;
}

SymbolBlock fold_and_normalize(const SymbolBlock& recovered, std::span<const double> taps,
                               const ChainConfig& cfg) {
  require_stage(recovered, Stage::recovered_freq, "fold_and_normalize");
  require_length(recovered.values.size(), cfg.n_sk(), "fold_and_normalize");
  require_length(taps.size(), cfg.n_sk(), "fold_and_normalize (taps)");
  const RVec gains = fold_gains(taps, cfg);
  SymbolBlock out{Stage::freq_domain, CVec(cfg.n_data, cplx{0.0, 0.0})};
  for (std::size_t p = 0; p < taps.size(); ++p) {
    out.values[extension_source(p, cfg)] += taps[p] * recovered.values[p];
  }
  for (std::size_t d = 0; d < cfg.n_data; ++d) {
    if (gains[d] == 0.0) {
      throw EqualizationError("equalization failure: zero effective gain on data bin " + std::to_string(d));
    }
    out.values[d] /= gains[d] + kEqualizerEpsilon;
  }
  return out;
}

std::vector<unsigned> detect(std::span<const cplx> symbols, Modulation scheme) {
  const auto& pts = constellation(scheme);
  std::vector<unsigned> labels(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    unsigned arg = 0;
    for (std::size_t c = 0; c < pts.size(); ++c) {
      const double d = std::norm(symbols[i] - pts[c]);
      if (d < best) {
        best = d;
        arg = static_cast<unsigned>(c);
      }
    }
    labels[i] = arg;
  }
  return labels;
}

ReceiverOutput receiver_chain(const SymbolBlock& rx, std::span<const double> taps, const ChainConfig& cfg,
                              Modulation scheme, cplx fade) {
  require_stage(rx, Stage::received, "receiver_chain");
  require_length(rx.values.size(), cfg.grid_size(), "receiver_chain");
  if (fade == cplx{0.0, 0.0}) throw EqualizationError("equalization failure: zero channel gain");
  SymbolBlock compensated = rx;
  if (fade != cplx{1.0, 0.0}) {
    for (auto& v : compensated.values) v /= fade;
  }
  const auto recovered = recover_frequency(compensated, cfg);
  const auto freq = fold_and_normalize(recovered, taps, cfg);
  auto soft = dft_deprecode(freq, cfg);

  ReceiverOutput out;
  out.labels = detect(soft.values, scheme);
  const auto& pts = constellation(scheme);
  out.detected = SymbolBlock{Stage::data_symbols, CVec(out.labels.size())};
  for (std::size_t i = 0; i < out.labels.size(); ++i) out.detected.values[i] = pts[out.labels[i]];
  out.equalized = std::move(soft.values);
  return out;
}

SymbolBlock transmit(std::span<const std::uint8_t> bits, Modulation scheme, std::span<const double> taps,
                     const ChainConfig& cfg) {
  const auto freq = dft_precode(map_bits(bits, scheme), cfg);
  return to_time_domain(apply_filter(spectrum_extend(freq, cfg), taps), cfg);
}

}  // namespace tinyshape
