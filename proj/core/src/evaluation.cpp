#include "tinyshape/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "tinyshape/adaptation.hpp"
#include "tinyshape/parallel.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/rng.hpp"

namespace tinyshape {

namespace {

constexpr std::uint64_t kCcdfRun = 0x1000;
constexpr std::uint64_t kOobeRun = 0x2000;

struct TxSide {
  SymbolBlock freq;
  SymbolBlock x;
  RVec taps;
  std::size_t slm_index = 0;
};

TxSide transmit_side(const Scheme& s, std::span<const std::uint8_t> bits, Modulation mod, double net_snr_db) {
  const ChainConfig& chain = s.chain;
  TxSide t;
  t.freq = dft_precode(map_bits(bits, mod), chain);
  switch (s.kind) {
    case SchemeKind::network: {
      if (!s.net) throw std::invalid_argument("scheme '" + s.name + "' has no network");
      const auto s_ext = spectrum_extend(t.freq, chain);
      const RVec coeffs = (*s.net)(build_input(s_ext, net_snr_db, chain.n_sk()));
      t.taps = taps_from_coeffs(coeffs, chain.n_sk());
      t.x = to_time_domain(apply_filter(s_ext, t.taps), chain);
      break;
    }
    case SchemeKind::static_taps:
      t.taps = s.taps;
      t.x = to_time_domain(apply_filter(spectrum_extend(t.freq, chain), t.taps), chain);
      break;
    case SchemeKind::clf:
      t.taps = s.taps;
      t.x = clf_transmit(to_time_domain(apply_filter(spectrum_extend(t.freq, chain), t.taps), chain), s.clf, chain);
      break;
    case SchemeKind::slm: {
      t.taps = s.taps;
      auto r = slm_transmit(t.freq, t.taps, s.slm_phases, chain);
      t.x = std::move(r.block);
      t.slm_index = r.index;
      break;
    }
  }
  return t;
}

}  // namespace

Scheme network_scheme(std::string name, InferenceNet net, const ChainConfig& chain) {
  Scheme s;
  s.name = std::move(name);
  s.kind = SchemeKind::network;
  s.chain = chain;
  s.net = std::make_shared<const InferenceNet>(std::move(net));
  return s;
}

Scheme static_scheme(std::string name, RVec taps, const ChainConfig& chain) {
  if (taps.size() != chain.n_sk()) throw std::invalid_argument("static_scheme: tap count does not match chain");
  Scheme s;
  s.name = std::move(name);
  s.kind = SchemeKind::static_taps;
  s.chain = chain;
  s.taps = std::move(taps);
  return s;
}

Scheme clf_scheme(std::string name, const ClfConfig& cfg, const ChainConfig& chain) {
  cfg.validate();
  Scheme s;
  s.name = std::move(name);
  s.kind = SchemeKind::clf;
  s.chain = chain;
  s.taps = unit_taps(chain.n_sk());
  s.clf = cfg;
  return s;
}

Scheme slm_scheme(std::string name, const SlmConfig& cfg, const ChainConfig& chain) {
  Scheme s;
  s.name = std::move(name);
  s.kind = SchemeKind::slm;
  s.chain = chain;
  s.taps = unit_taps(chain.n_sk());
  s.slm_phases = slm_phase_vectors(cfg, chain.n_data);
  return s;
}

std::vector<std::uint8_t> block_bits(std::uint64_t seed, std::uint64_t index, Modulation scheme,
                                     const ChainConfig& chain) {
  Rng rng = make_rng(seed, Stream::data_bits, index);
  std::vector<std::uint8_t> bits(chain.n_data * static_cast<std::size_t>(bits_per_symbol(scheme)));
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
  return bits;
}

BlockOutcome simulate_block(const Scheme& scheme, std::span<const std::uint8_t> bits, Modulation mod,
                            double net_snr_db, const ChannelCfg* channel, std::uint64_t block_index) {
  auto tx = transmit_side(scheme, bits, mod, net_snr_db);
  BlockOutcome out;
  out.papr_db = papr_db(tx.x);
  out.taps = std::move(tx.taps);
  if (channel) {
    const auto ch = apply_channel(tx.x, *channel, scheme.chain, block_index, scheme.chain.n_sk());
    out.unit_noise_energy = ch.unit_noise_energy;
    const ReceiverOutput rx =
        scheme.kind == SchemeKind::slm
            ? slm_receive(ch.received, out.taps, scheme.chain, mod, scheme.slm_phases[tx.slm_index], ch.fade)
            : receiver_chain(ch.received, out.taps, scheme.chain, mod, ch.fade);
    const auto sent = map_bits(bits, mod);
    out.mse = mse_e(sent.values, rx.equalized);
    out.ser = measured_ser(labels_from_bits(bits, mod), rx.labels);
  }
  out.tx = std::move(tx.x);
  return out;
}

RVec papr_samples(const Scheme& scheme, Modulation mod, double net_snr_db, std::size_t n_blocks, std::uint64_t seed,
                  unsigned threads) {
  RVec out(n_blocks);
  parallel_for(n_blocks, resolve_threads(threads), [&](std::size_t i) {
    const auto bits = block_bits(seed, i, mod, scheme.chain);
    out[i] = papr_db(transmit_side(scheme, bits, mod, net_snr_db).x);
  });
  return out;
}

std::vector<SymbolBlock> transmit_blocks(const Scheme& scheme, Modulation mod, double net_snr_db, std::size_t n_blocks,
                                         std::uint64_t seed, unsigned threads) {
  std::vector<SymbolBlock> out(n_blocks);
  parallel_for(n_blocks, resolve_threads(threads), [&](std::size_t i) {
    const auto bits = block_bits(seed, i, mod, scheme.chain);
    out[i] = transmit_side(scheme, bits, mod, net_snr_db).x;
  });
  return out;
}

RunMetrics evaluate_cell(const Scheme& scheme, const ChannelCfg& channel, Modulation mod, std::size_t n_blocks,
                         std::uint64_t seed, unsigned threads, std::span<const double> ccdf_grid) {
  std::vector<MetricAccumulator> slots(n_blocks);
  parallel_for(n_blocks, resolve_threads(threads), [&](std::size_t i) {
    const auto bits = block_bits(seed, i, mod, scheme.chain);
    const auto o = simulate_block(scheme, bits, mod, channel.snr_db, &channel, i);
    slots[i].add_block(o.papr_db, o.mse, o.ser);
  });
  MetricAccumulator total;
  for (const auto& s : slots) total.merge(s);
  const double lambda = std::isfinite(channel.snr_db) ? lookup_lambda(LambdaTable{}, channel.snr_db) : 1.0;
  return total.finalize(ccdf_grid, lambda);
}

void EvalConfig::validate() const {
  if (ccdf_blocks == 0) throw std::invalid_argument("eval.ccdf_blocks must be > 0");
  if (paired_blocks > ccdf_blocks) throw std::invalid_argument("eval.paired_blocks must be <= eval.ccdf_blocks");
  if (oobe_blocks < kOobeMinBlocks) throw std::invalid_argument("eval.oobe_blocks must be >= 10");
  if (!std::isfinite(ccdf_snr_db)) throw std::invalid_argument("eval.ccdf_snr_db must be finite");
  for (double s : snr_db) {
    if (!std::isfinite(s)) throw std::invalid_argument("eval.snr_db entries must be finite");
  }
  if (!std::isfinite(rician_k_db)) throw std::invalid_argument("eval.rician_k_db must be finite");
  if (!(ccdf_step_db > 0.0) || !(ccdf_hi_db > ccdf_lo_db)) throw std::invalid_argument("eval.ccdf grid is invalid");
}

RVec EvalConfig::ccdf_grid() const { return threshold_grid(ccdf_lo_db, ccdf_hi_db, ccdf_step_db); }

std::uint64_t cell_seed(std::uint64_t seed, ChannelModel channel, std::size_t snr_index, Modulation mod) {
  const std::uint64_t id = (static_cast<std::uint64_t>(channel) << 32) | (static_cast<std::uint64_t>(snr_index) << 8) |
                           static_cast<std::uint64_t>(mod);
  return derive_seed(seed, Stream::eval_cell, id);
}

EvalReport evaluate(std::span<const Scheme> schemes, const EvalConfig& cfg) {
  cfg.validate();
  const RVec grid = cfg.ccdf_grid();
  EvalReport report;
  const std::uint64_t ccdf_seed = derive_seed(cfg.seed, Stream::eval_cell, kCcdfRun);
  const std::uint64_t oobe_seed = derive_seed(cfg.seed, Stream::eval_cell, kOobeRun);

  for (const auto& s : schemes) {
    if (report.schemes.count(s.name)) throw std::invalid_argument("duplicate scheme name '" + s.name + "'");
    report.scheme_order.push_back(s.name);
    SchemeSummary sum;
    sum.ccdf_samples = papr_samples(s, cfg.ccdf_mod, cfg.ccdf_snr_db, cfg.ccdf_blocks, ccdf_seed, cfg.threads);
    sum.ccdf = empirical_ccdf(sum.ccdf_samples, grid);
    sum.papr_at_1e3_db = papr_at_ccdf(sum.ccdf_samples, 1e-3);
    double total = 0.0;
    for (double p : sum.ccdf_samples) total += p;
    sum.mean_papr_db = total / static_cast<double>(sum.ccdf_samples.size());
    sum.paired_papr.assign(sum.ccdf_samples.begin(),
                           sum.ccdf_samples.begin() + static_cast<std::ptrdiff_t>(cfg.paired_blocks));
    double paired = 0.0;
    for (double p : sum.paired_papr) paired += p;
    sum.paired_mean_papr_db = sum.paired_papr.empty() ? 0.0 : paired / static_cast<double>(sum.paired_papr.size());
    const auto blocks = transmit_blocks(s, cfg.ccdf_mod, cfg.ccdf_snr_db, cfg.oobe_blocks, oobe_seed, cfg.threads);
    sum.oobe_db = oobe_db(blocks, s.chain);
    report.schemes.emplace(s.name, std::move(sum));
  }

  for (auto model : cfg.channels) {
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
      for (auto mod : cfg.mods) {
        const std::uint64_t seed = cell_seed(cfg.seed, model, si, mod);
        ChannelCfg ch;
        ch.model = model;
        ch.snr_db = cfg.snr_db[si];
        if (model == ChannelModel::rician) ch.k_factor_db = cfg.rician_k_db;
        ch.seed = derive_seed(seed, Stream::channel_noise, 0);
        for (const auto& s : schemes) {
          CellResult cell;
          cell.scheme = s.name;
          cell.channel = model;
          cell.mod = mod;
          cell.snr_db = ch.snr_db;
          cell.metrics = evaluate_cell(s, ch, mod, cfg.ser_blocks, seed, cfg.threads, grid);
          cell.metrics.papr_db_samples.clear();
          report.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return report;
}

}  // namespace tinyshape
