#pragma once

#include <cstddef>
#include <span>

#include "tinyshape/types.hpp"

namespace tinyshape {

inline constexpr std::size_t kDefaultCoeffCount = 5;

/// Polynomial tap profile: coefficients r_0..r_{Z-1} and the realized taps.
struct FilterSpec {
  RVec coeffs;
  RVec taps;
};

/// Normalized tap positions t_k = (2k - n_sk - 1) / (n_sk - 1), k = 1..n_sk,
/// spanning [-1, 1]. Requires n_sk >= 2.
RVec tap_positions(std::size_t n_sk);

/// F_k = sum_z r_z t_k^z, evaluated with Horner's rule.
RVec taps_from_coeffs(std::span<const double> coeffs, std::size_t n_sk);

/// Basis matrix (row-major n_sk x n_coeffs) with entries t_k^z; the Jacobian
/// d F_k / d r_z of taps_from_coeffs.
RVec tap_basis(std::size_t n_sk, std::size_t n_coeffs);

FilterSpec make_filter(std::span<const double> coeffs, std::size_t n_sk);

/// Continuous square-root raised-cosine magnitude on the normalized axis
/// |t| <= 1: unity for |t| <= 1 - rolloff, sqrt of the raised-cosine rolloff
/// over (1 - rolloff, 1], zero at |t| = 1 for rolloff > 0.
double rrc_response(double t, double rolloff);

/// rrc_response sampled at tap_positions(n_sk). rolloff in [0, 1].
RVec rrc_taps(std::size_t n_sk, double rolloff);

RVec unit_taps(std::size_t n_sk);

}  // namespace tinyshape
