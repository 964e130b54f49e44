#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tinyshape/signal_chain.hpp"
#include "tinyshape/types.hpp"

namespace tinyshape {

inline constexpr double kTailX0Db = 6.0;
inline constexpr double kTailUpperDb = 20.0;
inline constexpr double kTailGridDb = 0.1;

/// 10 log10(max |s|^2 / mean |s|^2). Throws on an empty or all-zero signal.
double papr_db(std::span<const cplx> signal);
double papr_db(const SymbolBlock& block);

struct CcdfPoint {
  double threshold_db = 0.0;
  double probability = 0.0;
};

/// Fraction of samples strictly greater than each threshold.
std::vector<CcdfPoint> empirical_ccdf(std::span<const double> samples, std::span<const double> thresholds);

/// Evenly spaced thresholds lo, lo + step, ..., up to and including hi.
RVec threshold_grid(double lo_db, double hi_db, double step_db);

/// PAPR level exceeded with probability p: the floor(p * N)-th largest sample
/// (0-based, descending order).
double papr_at_ccdf(std::span<const double> samples, double p);

/// Trapezoidal integral of the empirical CCDF over [x0_db, upper_db].
double tail_p(std::span<const double> samples, double x0_db = kTailX0Db, double upper_db = kTailUpperDb,
              double step_db = kTailGridDb);

/// softplus_beta(x) = log(1 + exp(beta x)) / beta, evaluated without overflow.
double softplus(double x, double beta) noexcept;
/// d softplus_beta / dx = sigmoid(beta x).
double sigmoid(double x, double beta) noexcept;

struct SurrogateResult {
  double value = 0.0;  ///< mean over blocks
  RVec grad;           ///< d value / d papr_db of each block
};

SurrogateResult surrogate_p(std::span<const double> papr_db_values, double x0_db, double beta);

/// Mean |a - b|^2. Throws on length mismatch.
double mse_e(std::span<const cplx> tx, std::span<const cplx> rx);

struct SerCount {
  std::size_t errors = 0;
  std::size_t total = 0;
  double ratio() const noexcept { return total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total); }
};

SerCount measured_ser(std::span<const unsigned> tx_labels, std::span<const unsigned> detected_labels);
SerCount measured_ser(std::span<const cplx> tx, std::span<const cplx> detected);

double total_loss(double mse, double tail, double lambda);

inline constexpr std::size_t kOobeMinBlocks = 10;
inline constexpr double kOobeFloorDb = -300.0;

/// Out-of-band to in-band mean PSD ratio in dB. The blocks are concatenated
/// into one stream and analysed with a Hann-windowed Welch estimate (segment
/// length = grid size, 50% overlap). In-band bins are the `n_occupied`
/// centred bins (defaults to cfg.n_sk()).
double oobe_db(std::span<const SymbolBlock> blocks, const ChainConfig& cfg, std::size_t n_occupied = 0);

struct RunMetrics {
  RVec papr_db_samples;
  std::vector<CcdfPoint> ccdf;
  double mean_papr_db = 0.0;
  double papr_at_1e3_db = 0.0;
  double tail_p = 0.0;
  double mse_e = 0.0;
  double ser = 0.0;
  double ser_sem = 0.0;  ///< standard error of the per-block SER mean
  std::size_t symbol_errors = 0;
  std::size_t symbols = 0;
  double loss = 0.0;
  double oobe_db = std::numeric_limits<double>::quiet_NaN();
};

/// Mergeable per-block accumulator for parallel Monte-Carlo runs. merge()
/// appends in call order, so reducing slot accumulators in index order gives
/// thread-count independent results.
class MetricAccumulator {
 public:
  void add_block(double papr, double mse, const SerCount& ser);
  void merge(const MetricAccumulator& other);

  std::size_t blocks() const noexcept { return papr_.size(); }
  const RVec& papr_samples() const noexcept { return papr_; }

  RunMetrics finalize(std::span<const double> ccdf_grid, double lambda, double x0_db = kTailX0Db,
                      double upper_db = kTailUpperDb) const;

 private:
  RVec papr_;
  RVec mse_;
  RVec block_ser_;
  std::size_t errors_ = 0;
  std::size_t symbols_ = 0;
};

}  // namespace tinyshape
