#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "tinyshape/types.hpp"

namespace testutil {

using tinyshape::cplx;
using tinyshape::CVec;
using tinyshape::RVec;

inline std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(g() & 1u);
  return b;
}

inline CVec random_cvec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd(0.0, scale);
  CVec v(n);
  for (auto& x : v) x = {nd(g), nd(g)};
  return v;
}

inline RVec random_rvec(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> ud(lo, hi);
  RVec v(n);
  for (auto& x : v) x = ud(g);
  return v;
}

// Direct O(N^2) DFT, forward sign convention exp(-j 2 pi k n / N).
inline CVec naive_dft(const CVec& x, bool inverse = false) {
  const std::size_t n = x.size();
  CVec out(n);
  const double sgn = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double a = sgn * 2.0 * M_PI * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * cplx{std::cos(a), std::sin(a)};
    }
    out[k] = acc;
  }
  return out;
}

inline double energy(const CVec& v) {
  double e = 0.0;
  for (const auto& x : v) e += std::norm(x);
  return e;
}

inline double qfunc(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Gray QPSK symbol error rate for complex noise variance n0 per symbol
// (unit symbol energy).
inline double qpsk_ser(double n0) {
  const double q = qfunc(std::sqrt(1.0 / n0));
  return 2.0 * q - q * q;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testutil
