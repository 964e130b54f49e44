#include "tinyshape/polyfilter.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tinyshape {

RVec tap_positions(std::size_t n_sk) {
  if (n_sk < 2) throw std::invalid_argument("tap_positions: n_sk must be >= 2");
  RVec t(n_sk);
  const double denom = static_cast<double>(n_sk - 1);
  for (std::size_t k = 1; k <= n_sk; ++k) {
    t[k - 1] = (2.0 * static_cast<double>(k) - static_cast<double>(n_sk) - 1.0) / denom;
  }
  return t;
}

RVec taps_from_coeffs(std::span<const double> coeffs, std::size_t n_sk) {
  if (n_sk < 2) throw std::invalid_argument("taps_from_coeffs: n_sk must be >= 2");
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw std::invalid_argument("taps_from_coeffs: non-finite coefficient");
  }
  const RVec t = tap_positions(n_sk);
  RVec taps(n_sk, 0.0);
  for (std::size_t k = 0; k < n_sk; ++k) {
    double acc = 0.0;
    for (std::size_t z = coeffs.size(); z-- > 0;) acc = acc * t[k] + coeffs[z];
    taps[k] = acc;
  }
  return taps;
}

RVec tap_basis(std::size_t n_sk, std::size_t n_coeffs) {
  const RVec t = tap_positions(n_sk);
  RVec basis(n_sk * n_coeffs);
  for (std::size_t k = 0; k < n_sk; ++k) {
    double p = 1.0;
    for (std::size_t z = 0; z < n_coeffs; ++z) {
      basis[k * n_coeffs + z] = p;
      p *= t[k];
    }
  }
  return basis;
}

FilterSpec make_filter(std::span<const double> coeffs, std::size_t n_sk) {
  return FilterSpec{RVec(coeffs.begin(), coeffs.end()), taps_from_coeffs(coeffs, n_sk)};
}

double rrc_response(double t, double rolloff) {
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("rrc: rolloff must be in [0, 1]");
  const double a = std::abs(t);
  if (a <= 1.0 - rolloff) return 1.0;
  if (a >= 1.0) return 0.0;
  const double rc = 0.5 * (1.0 + std::cos(std::numbers::pi * (a - (1.0 - rolloff)) / rolloff));
  return std::sqrt(rc);
}

RVec rrc_taps(std::size_t n_sk, double rolloff) {
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("rrc_taps: rolloff must be in [0, 1]");
  if (n_sk < 2) return unit_taps(n_sk);
  const RVec t = tap_positions(n_sk);
  RVec taps(n_sk);
  for (std::size_t k = 0; k < n_sk; ++k) taps[k] = rrc_response(t[k], rolloff);
  return taps;
}

RVec unit_taps(std::size_t n_sk) { return RVec(n_sk, 1.0); }

}  // namespace tinyshape
