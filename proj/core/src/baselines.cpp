#include "tinyshape/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tinyshape/fft.hpp"
#include "tinyshape/loss_metrics.hpp"
#include "tinyshape/rng.hpp"

namespace tinyshape {

void ClfConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("baselines.clf.iterations must be >= 1");
  if (!std::isfinite(clip_ratio_db)) throw std::invalid_argument("baselines.clf.clip_ratio_db must be finite");
}

ClipResult clip_stage(const SymbolBlock& block, double level) {
  if (!(level > 0.0)) throw std::invalid_argument("clip_stage: level must be > 0");
  ClipResult r{block, level, 0};
  for (auto& v : r.block.values) {
    const double a = std::abs(v);
    if (a > level) {
      v *= level / a;
      ++r.clipped;
    }
  }
  return r;
}

SymbolBlock clf_transmit(const SymbolBlock& block, const ClfConfig& cfg, const ChainConfig& chain,
                         std::size_t n_occupied) {
  cfg.validate();
  if (block.stage != Stage::time_domain) throw std::invalid_argument("clf_transmit: expected a time-domain block");
  const std::size_t m = chain.grid_size();
  if (block.values.size() != m) throw std::invalid_argument("clf_transmit: block length does not match grid size");
  const std::size_t n_occ = n_occupied == 0 ? chain.n_sk() : n_occupied;

  std::vector<std::uint8_t> in_band(m, 0);
  for (std::size_t k = 0; k < n_occ; ++k) in_band[occupied_bin(k, n_occ, m)] = 1;
  const Fft& fft = fft_plan(m);
  const double inv_m = 1.0 / static_cast<double>(m);

  SymbolBlock current = block;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    double power = 0.0;
    for (const auto& v : current.values) power += std::norm(v);
    const double rms = std::sqrt(power / static_cast<double>(m));
    if (rms == 0.0) break;
    auto clipped = clip_stage(current, rms * std::pow(10.0, cfg.clip_ratio_db / 20.0));
    if (clipped.clipped == 0) break;
    CVec& x = clipped.block.values;
    fft.forward(x);
    for (std::size_t k = 0; k < m; ++k) {
      if (!in_band[k]) x[k] = 0.0;
    }
    fft.inverse(x);
    for (auto& v : x) v *= inv_m;
    current = std::move(clipped.block);
  }
  return current;
}

void SlmConfig::validate() const {
  if (num_candidates < 1) throw std::invalid_argument("baselines.slm.num_candidates must be >= 1");
}

std::vector<CVec> slm_phase_vectors(const SlmConfig& cfg, std::size_t n_data) {
  cfg.validate();
  static const cplx alphabet[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  std::vector<CVec> phases(cfg.num_candidates, CVec(n_data, cplx{1.0, 0.0}));
  Rng rng = make_rng(cfg.seed, Stream::slm_phases, 0);
  for (std::size_t u = 1; u < cfg.num_candidates; ++u) {
    for (auto& p : phases[u]) p = alphabet[rng() >> 62];
  }
  return phases;
}

SlmResult slm_transmit(const SymbolBlock& freq_block, std::span<const double> taps, const SlmConfig& cfg,
                       const ChainConfig& chain) {
  const auto phases = slm_phase_vectors(cfg, chain.n_data);
  return slm_transmit(freq_block, taps, phases, chain);
}

SlmResult slm_transmit(const SymbolBlock& freq_block, std::span<const double> taps,
                       std::span<const CVec> phases, const ChainConfig& chain) {
  if (freq_block.stage != Stage::freq_domain) throw std::invalid_argument("slm_transmit: expected a freq_domain block");
  if (phases.empty()) throw std::invalid_argument("slm_transmit: no candidates");
  SlmResult best;
  best.candidate_papr_db.reserve(phases.size());
  for (std::size_t u = 0; u < phases.size(); ++u) {
    if (phases[u].size() != freq_block.values.size()) throw std::invalid_argument("slm_transmit: phase length mismatch");
    SymbolBlock rotated = freq_block;
    for (std::size_t d = 0; d < rotated.values.size(); ++d) rotated.values[d] *= phases[u][d];
    auto x = to_time_domain(apply_filter(spectrum_extend(rotated, chain), taps), chain);
    const double p = papr_db(x);
    best.candidate_papr_db.push_back(p);
    if (u == 0 || p < best.candidate_papr_db[best.index]) {
      best.index = u;
      best.block = std::move(x);
    }
  }
  return best;
}

ReceiverOutput slm_receive(const SymbolBlock& rx, std::span<const double> taps, const ChainConfig& chain,
                           Modulation scheme, std::span<const cplx> phases, cplx fade) {
  if (rx.stage != Stage::received) throw std::invalid_argument("slm_receive: expected a received block");
  if (phases.size() != chain.n_data) throw std::invalid_argument("slm_receive: phase length mismatch");
  if (fade == cplx{0.0, 0.0}) throw EqualizationError("equalization failure: zero channel gain");
  SymbolBlock compensated = rx;
  if (fade != cplx{1.0, 0.0}) {
    for (auto& v : compensated.values) v /= fade;
  }
  auto freq = fold_and_normalize(recover_frequency(compensated, chain), taps, chain);
  for (std::size_t d = 0; d < freq.values.size(); ++d) freq.values[d] *= std::conj(phases[d]);
  auto soft = dft_deprecode(freq, chain);

  ReceiverOutput out;
  out.labels = detect(soft.values, scheme);
  const auto& pts = constellation(scheme);
  out.detected = SymbolBlock{Stage::data_symbols, CVec(out.labels.size())};
  for (std::size_t i = 0; i < out.labels.size(); ++i) out.detected.values[i] = pts[out.labels[i]];
  out.equalized = std::move(soft.values);
  return out;
}

}  // namespace tinyshape
