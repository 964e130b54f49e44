#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "tinyshape/baselines.hpp"
#include "tinyshape/loss_metrics.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/signal_chain.hpp"

using namespace tinyshape;

namespace {

const ChainConfig kPlain = ChainConfig{}.without_extension();

SymbolBlock plain_block(std::uint64_t seed) {
  return transmit(testutil::random_bits(420, seed), Modulation::qpsk, unit_taps(210), kPlain);
}

SymbolBlock freq_block(std::uint64_t seed) {
  return dft_precode(map_bits(testutil::random_bits(420, seed), Modulation::qpsk), kPlain);
}

double rms(const CVec& v) { return std::sqrt(testutil::energy(v) / static_cast<double>(v.size())); }

}  // namespace

TEST_CASE("clf: clip level above peak is an identity pass") {
  const auto x = plain_block(1);
  ClfConfig cfg;
  cfg.clip_ratio_db = 20.0;
  CHECK(clf_transmit(x, cfg, kPlain).values == x.values);
}

TEST_CASE("clf: clip stage bounds the envelope exactly") {
  const auto x = plain_block(2);
  const double level = rms(x.values) * std::pow(10.0, 4.0 / 20.0);
  const auto r = clip_stage(x, level);
  CHECK(r.clipped > 0);
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    CHECK(std::abs(r.block.values[i]) <= level * (1 + 1e-15));
    if (std::abs(x.values[i]) <= level) CHECK(r.block.values[i] == x.values[i]);
    else CHECK(std::abs(std::arg(r.block.values[i]) - std::arg(x.values[i])) < 1e-12);
  }
}

TEST_CASE("clf: clip stage never raises PAPR on 100 blocks") {
  for (std::uint64_t b = 0; b < 100; ++b) {
    const auto x = plain_block(100 + b);
    const double level = rms(x.values) * std::pow(10.0, 4.0 / 20.0);
    CHECK(papr_db(clip_stage(x, level).block) <= papr_db(x) + 1e-12);
  }
}

TEST_CASE("clf: output stays inside the allocation and is deterministic") {
  const auto x = plain_block(3);
  const auto y = clf_transmit(x, ClfConfig{}, kPlain);
  CHECK(y.values == clf_transmit(x, ClfConfig{}, kPlain).values);
  const auto spec = testutil::naive_dft(y.values);
  double in = 0.0, out = 0.0;
  for (std::size_t m = 0; m < spec.size(); ++m) {
    const long f = m < 512 ? static_cast<long>(m) : static_cast<long>(m) - 1024;
    ((f >= -105 && f < 105) ? in : out) += std::norm(spec[m]);
  }
  CHECK(out < 1e-20 * in);
  ClfConfig bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("slm: identity candidate, forced U = 1, exhaustive argmin") {
  const auto taps = unit_taps(210);
  SlmConfig cfg;
  cfg.seed = 5;
  for (std::uint64_t b = 0; b < 20; ++b) {
    const auto f = freq_block(200 + b);
    const auto plain = to_time_domain(apply_filter(spectrum_extend(f, kPlain), taps), kPlain);
    const auto r = slm_transmit(f, taps, cfg, kPlain);
    CHECK(papr_db(r.block) <= papr_db(plain) + 1e-12);

    // Oracle: rebuild every candidate and take the first minimum.
    const auto phases = slm_phase_vectors(cfg, 210);
    REQUIRE(phases.size() == 8);
    std::size_t best = 0;
    double best_p = 1e9;
    for (std::size_t u = 0; u < phases.size(); ++u) {
      SymbolBlock rot = f;
      for (std::size_t k = 0; k < 210; ++k) rot.values[k] *= phases[u][k];
      const double p = papr_db(to_time_domain(apply_filter(spectrum_extend(rot, kPlain), taps), kPlain));
      CHECK(p == doctest::Approx(r.candidate_papr_db[u]).epsilon(1e-12));
      if (p < best_p) {
        best_p = p;
        best = u;
      }
    }
    CHECK(r.index == best);
  }
  SlmConfig one;
  one.num_candidates = 1;
  const auto f = freq_block(9);
  const auto r1 = slm_transmit(f, taps, one, kPlain);
  CHECK(r1.index == 0);
  CHECK(r1.block.values == to_time_domain(apply_filter(spectrum_extend(f, kPlain), taps), kPlain).values);
}

TEST_CASE("slm: phase alphabet and scale invariance of the choice") {
  SlmConfig cfg;
  cfg.seed = 3;
  const auto ph = slm_phase_vectors(cfg, 210);
  for (const auto& v : ph[0]) CHECK(v == cplx{1.0, 0.0});
  for (std::size_t u = 1; u < ph.size(); ++u) {
    for (const auto& v : ph[u]) {
      const bool ok = v == cplx{1, 0} || v == cplx{-1, 0} || v == cplx{0, 1} || v == cplx{0, -1};
      CHECK(ok);
    }
  }
  for (std::uint64_t b = 0; b < 10; ++b) {
    const auto f = freq_block(300 + b);
    SymbolBlock g = f;
    for (auto& v : g.values) v *= cplx{2.5, -1.0};
    CHECK(slm_transmit(f, unit_taps(210), cfg, kPlain).index == slm_transmit(g, unit_taps(210), cfg, kPlain).index);
  }
}

TEST_CASE("slm: receiver recovers the payload") {
  SlmConfig cfg;
  cfg.seed = 11;
  const auto ph = slm_phase_vectors(cfg, 210);
  const auto bits = testutil::random_bits(420, 4);
  const auto f = dft_precode(map_bits(bits, Modulation::qpsk), kPlain);
  const auto r = slm_transmit(f, unit_taps(210), ph, kPlain);
  const auto o = slm_receive(SymbolBlock{Stage::received, r.block.values}, unit_taps(210), kPlain, Modulation::qpsk,
                             ph[r.index]);
  CHECK(o.labels == labels_from_bits(bits, Modulation::qpsk));
}
