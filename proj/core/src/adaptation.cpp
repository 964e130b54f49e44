#include "tinyshape/adaptation.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "tinyshape/channel.hpp"
#include "tinyshape/loss_metrics.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/rng.hpp"

namespace tinyshape {

void LambdaTable::validate() const {
  if (bins.empty()) throw std::invalid_argument("lambda table: no bins");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i];
    if (!(b.hi_db > b.lo_db)) throw std::invalid_argument("lambda table: bin " + std::to_string(i) + " is empty");
    if (!(b.lambda > 0.0 && b.lambda <= 1.0)) throw std::invalid_argument("lambda table: lambda must be in (0, 1]");
    if (i > 0 && bins[i - 1].hi_db != b.lo_db) throw std::invalid_argument("lambda table: bins must be contiguous");
  }
}

double lookup_lambda(const LambdaTable& table, double snr_db) {
  if (!std::isfinite(snr_db)) throw std::invalid_argument("lookup_lambda: snr must be finite");
  if (table.bins.empty()) throw std::invalid_argument("lookup_lambda: empty table");
  if (snr_db < table.bins.front().lo_db) return table.bins.front().lambda;
  for (const auto& b : table.bins) {
    if (snr_db >= b.lo_db && snr_db < b.hi_db) return b.lambda;
  }
  return table.bins.back().lambda;
}

CycleOutput adaptation_cycle(AdaptState& state, double t_ms, double snr_db, const InferenceNet& net,
                             const SymbolBlock& s_ext, const LambdaTable& table) {
  if (!(state.period_ms > 0.0)) throw std::invalid_argument("adaptation_cycle: period must be > 0");
  state.lambda = lookup_lambda(table, snr_db);
  const RVec input = build_input(s_ext, snr_db, s_ext.values.size());
  CycleOutput out;
  out.coeffs = net(input);
  state.taps = taps_from_coeffs(out.coeffs, s_ext.values.size());
  state.last_feedback_ms = t_ms;
  state.log.push_back({t_ms, snr_db, state.lambda, out.coeffs});
  out.shaped = apply_filter(s_ext, state.taps);
  return out;
}

std::vector<TracePoint> parse_trace(std::istream& in) {
  std::vector<TracePoint> trace;
  std::string line;
  if (!std::getline(in, line)) return trace;
  if (line.rfind("t_ms", 0) != 0) throw std::invalid_argument("trace: expected header 't_ms,snr_db'");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    TracePoint p;
    char comma = 0;
    if (!(ss >> p.t_ms >> comma >> p.snr_db) || comma != ',' || !std::isfinite(p.t_ms) || !std::isfinite(p.snr_db)) {
      throw std::invalid_argument("trace: malformed row " + std::to_string(row) + ": '" + line + "'");
    }
    trace.push_back(p);
  }
  return trace;
}

std::vector<TracePoint> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("trace: cannot open '" + path + "'");
  return parse_trace(in);
}

std::vector<TracePoint> preset_trace(const std::string& name) {
  double snr = 0.0;
  if (name == "factory") {
    snr = 5.0;
  } else if (name == "rural") {
    snr = 15.0;
  } else {
    throw std::invalid_argument("unknown trace preset '" + name + "'");
  }
  std::vector<TracePoint> trace;
  for (int t = 0; t <= 1000; t += 100) trace.push_back({static_cast<double>(t), snr});
  return trace;
}

TrafficGenerator::TrafficGenerator(std::uint64_t seed, Modulation scheme, const ChainConfig& chain)
    : seed_(seed), scheme_(scheme), n_bits_(chain.n_data * static_cast<std::size_t>(bits_per_symbol(scheme))) {}

std::vector<std::uint8_t> TrafficGenerator::bits(std::uint64_t block_index) const {
  Rng rng = make_rng(seed_, Stream::traffic, block_index);
  std::vector<std::uint8_t> out(n_bits_);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng() >> 63);
  return out;
}

ScenarioResult run_scenario(std::span<const TracePoint> trace, const InferenceNet& net, const TrafficGenerator& traffic,
                            const ChainConfig& chain, const ScenarioConfig& cfg) {
  if (!(cfg.period_ms > 0.0)) throw std::invalid_argument("adapt.period_ms must be > 0");
  if (cfg.blocks_per_tick == 0) throw std::invalid_argument("adapt.blocks_per_tick must be >= 1");
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].t_ms < trace[i - 1].t_ms) {
      throw std::invalid_argument("trace is not sorted by time at row " + std::to_string(i + 1));
    }
  }
  ScenarioResult result;
  if (trace.empty()) return result;

  AdaptState state;
  state.period_ms = cfg.period_ms;
  ChannelCfg channel;
  channel.model = ChannelModel::awgn;
  channel.seed = derive_seed(cfg.seed, Stream::channel_noise, 0);

  std::size_t cursor = 0;
  std::uint64_t block_index = 0;
  const double t0 = trace.front().t_ms;
  for (std::size_t tick = 0;; ++tick) {
    const double t = t0 + static_cast<double>(tick) * cfg.period_ms;
    if (t > trace.back().t_ms) break;
    while (cursor + 1 < trace.size() && trace[cursor + 1].t_ms <= t) ++cursor;
    const double snr = trace[cursor].snr_db;
    channel.snr_db = snr;

    TickRecord rec;
    rec.t_ms = t;
    rec.snr_db = snr;
    double papr_sum = 0.0;
    SerCount ser;
    for (std::size_t b = 0; b < cfg.blocks_per_tick; ++b, ++block_index) {
      const auto bits = traffic.bits(block_index);
      const auto s_ext = spectrum_extend(dft_precode(map_bits(bits, traffic.scheme()), chain), chain);
      SymbolBlock shaped;
      if (b == 0) {
        auto cycle = adaptation_cycle(state, t, snr, net, s_ext, cfg.table);
        ++result.tap_updates;
        rec.coeffs = std::move(cycle.coeffs);
        shaped = std::move(cycle.shaped);
      } else {
        shaped = apply_filter(s_ext, state.taps);
      }
      const auto x = to_time_domain(shaped, chain);
      papr_sum += papr_db(x);
      const auto rx = apply_channel(x, channel, chain, block_index);
      const auto out = receiver_chain(rx.received, state.taps, chain, traffic.scheme(), rx.fade);
      const auto sent = labels_from_bits(bits, traffic.scheme());
      const auto c = measured_ser(sent, out.labels);
      ser.errors += c.errors;
      ser.total += c.total;
    }
    rec.lambda = state.lambda;
    rec.papr_db = papr_sum / static_cast<double>(cfg.blocks_per_tick);
    rec.ser_window = ser.ratio();
    result.ticks.push_back(std::move(rec));
  }
  return result;
}

}  // namespace tinyshape
