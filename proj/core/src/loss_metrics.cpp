#include "tinyshape/loss_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tinyshape/fft.hpp"

namespace tinyshape {

double papr_db(std::span<const cplx> signal) {
  if (signal.empty()) throw std::invalid_argument("papr_db: empty signal");
  double peak = 0.0;
  double sum = 0.0;
  for (const auto& v : signal) {
    const double p = std::norm(v);
    peak = std::max(peak, p);
    sum += p;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("papr_db: zero signal");
  const double mean = sum / static_cast<double>(signal.size());
  return 10.0 * std::log10(peak / mean);
}

double papr_db(const SymbolBlock& block) {
  if (block.stage != Stage::time_domain && block.stage != Stage::received) {
    throw std::invalid_argument("papr_db: expected a time-domain block, got " + std::string(to_string(block.stage)));
  }
  return papr_db(block.values);
}

std::vector<CcdfPoint> empirical_ccdf(std::span<const double> samples, std::span<const double> thresholds) {
  if (samples.empty()) throw std::invalid_argument("empirical_ccdf: no samples");
  RVec sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  std::vector<CcdfPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
    out.push_back({t, static_cast<double>(above) / n});
  }
  return out;
}

RVec threshold_grid(double lo_db, double hi_db, double step_db) {
  if (!(step_db > 0.0) || !(hi_db >= lo_db)) throw std::invalid_argument("threshold_grid: invalid range");
  const auto n = static_cast<std::size_t>(std::llround((hi_db - lo_db) / step_db)) + 1;
  RVec grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = lo_db + static_cast<double>(i) * step_db;
  return grid;
}

double papr_at_ccdf(std::span<const double> samples, double p) {
  if (samples.empty()) throw std::invalid_argument("papr_at_ccdf: no samples");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("papr_at_ccdf: probability must be in (0, 1)");
  RVec sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto idx = std::min(sorted.size() - 1, static_cast<std::size_t>(std::floor(p * static_cast<double>(sorted.size()))));
  return sorted[idx];
}

double tail_p(std::span<const double> samples, double x0_db, double upper_db, double step_db) {
  if (!(upper_db > x0_db)) throw std::invalid_argument("tail_p: upper_db must exceed x0_db");
  if (samples.empty()) return 0.0;
  const RVec grid = threshold_grid(x0_db, upper_db, step_db);
  const auto ccdf = empirical_ccdf(samples, grid);
  double area = 0.0;
  for (std::size_t i = 1; i < ccdf.size(); ++i) {
    area += 0.5 * (ccdf[i - 1].probability + ccdf[i].probability) * (ccdf[i].threshold_db - ccdf[i - 1].threshold_db);
  }
  return area;
}

double softplus(double x, double beta) noexcept {
  const double z = beta * x;
  if (z > 0.0) return (z + std::log1p(std::exp(-z))) / beta;
  return std::log1p(std::exp(z)) / beta;
}

double sigmoid(double x, double beta) noexcept {
  const double z = beta * x;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

SurrogateResult surrogate_p(std::span<const double> papr_db_values, double x0_db, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("surrogate_p: sharpness must be > 0");
  SurrogateResult r;
  if (papr_db_values.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(papr_db_values.size());
  r.grad.resize(papr_db_values.size());
  for (std::size_t i = 0; i < papr_db_values.size(); ++i) {
    r.value += softplus(papr_db_values[i] - x0_db, beta);
    r.grad[i] = sigmoid(papr_db_values[i] - x0_db, beta) * inv_n;
  }
  r.value *= inv_n;
  return r;
}

double mse_e(std::span<const cplx> tx, std::span<const cplx> rx) {
  if (tx.size() != rx.size()) {
    throw std::invalid_argument("mse_e: length mismatch (" + std::to_string(tx.size()) + " vs " +
                                std::to_string(rx.size()) + ")");
  }
  if (tx.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) s += std::norm(tx[i] - rx[i]);
  return s / static_cast<double>(tx.size());
}

SerCount measured_ser(std::span<const unsigned> tx_labels, std::span<const unsigned> detected_labels) {
  if (tx_labels.size() != detected_labels.size()) throw std::invalid_argument("measured_ser: length mismatch");
  SerCount c;
  c.total = tx_labels.size();
  for (std::size_t i = 0; i < tx_labels.size(); ++i) c.errors += tx_labels[i] != detected_labels[i] ? 1 : 0;
  return c;
}

SerCount measured_ser(std::span<const cplx> tx, std::span<const cplx> detected) {
  if (tx.size() != detected.size()) throw std::invalid_argument("measured_ser: length mismatch");
  SerCount c;
  c.total = tx.size();
  for (std::size_t i = 0; i < tx.size(); ++i) c.errors += tx[i] != detected[i] ? 1 : 0;
  return c;
}

double total_loss(double mse, double tail, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("total_loss: lambda must be >= 0");
  return mse + lambda * tail;
}

double oobe_db(std::span<const SymbolBlock> blocks, const ChainConfig& cfg, std::size_t n_occupied) {
  if (blocks.size() < kOobeMinBlocks) {
    throw std::invalid_argument("oobe_db: need at least " + std::to_string(kOobeMinBlocks) + " blocks, got " +
                                std::to_string(blocks.size()));
  }
  const std::size_t m = cfg.grid_size();
  const std::size_t n_occ = n_occupied == 0 ? cfg.n_sk() : n_occupied;
  if (n_occ > m) throw std::invalid_argument("oobe_db: occupied bins exceed grid");

  CVec stream;
  stream.reserve(blocks.size() * m);
  for (const auto& b : blocks) {
    if (b.values.size() != m) throw std::invalid_argument("oobe_db: block length does not match grid size");
    stream.insert(stream.end(), b.values.begin(), b.values.end());
  }

  RVec window(m);
  for (std::size_t n = 0; n < m; ++n) {
    window[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(m)));
  }

  const Fft& fft = fft_plan(m);
  RVec psd(m, 0.0);
  CVec seg(m);
  const std::size_t hop = std::max<std::size_t>(1, m / 2);
  for (std::size_t start = 0; start + m <= stream.size(); start += hop) {
    for (std::size_t n = 0; n < m; ++n) seg[n] = stream[start + n] * window[n];
    fft.forward(seg);
    for (std::size_t k = 0; k < m; ++k) psd[k] += std::norm(seg[k]);
  }

  std::vector<std::uint8_t> in_band(m, 0);
  for (std::size_t k = 0; k < n_occ; ++k) in_band[occupied_bin(k, n_occ, m)] = 1;
  double in_sum = 0.0;
  double out_sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) (in_band[k] ? in_sum : out_sum) += psd[k];
  const std::size_t n_out = m - n_occ;
  if (n_out == 0) return kOobeFloorDb;
  if (!(in_sum > 0.0)) throw std::invalid_argument("oobe_db: no in-band power");
  const double ratio = (out_sum / static_cast<double>(n_out)) / (in_sum / static_cast<double>(n_occ));
  return std::max(kOobeFloorDb, 10.0 * std::log10(std::max(ratio, 1e-30)));
}

void MetricAccumulator::add_block(double papr, double mse, const SerCount& ser) {
  papr_.push_back(papr);
  mse_.push_back(mse);
  block_ser_.push_back(ser.ratio());
  errors_ += ser.errors;
  symbols_ += ser.total;
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  papr_.insert(papr_.end(), other.papr_.begin(), other.papr_.end());
  mse_.insert(mse_.end(), other.mse_.begin(), other.mse_.end());
  block_ser_.insert(block_ser_.end(), other.block_ser_.begin(), other.block_ser_.end());
  errors_ += other.errors_;
  symbols_ += other.symbols_;
}

RunMetrics MetricAccumulator::finalize(std::span<const double> ccdf_grid, double lambda, double x0_db,
                                       double upper_db) const {
  RunMetrics r;
  r.papr_db_samples = papr_;
  if (papr_.empty()) return r;
  const auto n = static_cast<double>(papr_.size());
  r.ccdf = empirical_ccdf(papr_, ccdf_grid);
  double sum = 0.0;
  for (double p : papr_) sum += p;
  r.mean_papr_db = sum / n;
  r.papr_at_1e3_db = papr_at_ccdf(papr_, 1e-3);
  r.tail_p = tail_p(papr_, x0_db, upper_db);
  double mse_sum = 0.0;
  for (double m : mse_) mse_sum += m;
  r.mse_e = mse_sum / n;
  r.symbol_errors = errors_;
  r.symbols = symbols_;
  r.ser = symbols_ == 0 ? 0.0 : static_cast<double>(errors_) / static_cast<double>(symbols_);
  if (block_ser_.size() > 1) {
    double mean = 0.0;
    for (double s : block_ser_) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : block_ser_) var += (s - mean) * (s - mean);
    var /= n - 1.0;
    r.ser_sem = std::sqrt(var / n);
  }
  r.loss = total_loss(r.mse_e, r.tail_p, lambda);
  return r;
}

}  // namespace tinyshape
