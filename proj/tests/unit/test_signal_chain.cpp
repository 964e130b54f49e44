#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "tinyshape/channel.hpp"
#include "tinyshape/fft.hpp"
#include "tinyshape/loss_metrics.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/signal_chain.hpp"

using namespace tinyshape;
using testutil::random_bits;

namespace {

// Gray tables written out from the per-axis bit rules.
cplx gray16(unsigned label) {
  const int b0 = (label >> 3) & 1, b1 = (label >> 2) & 1, b2 = (label >> 1) & 1, b3 = label & 1;
  const double i = (1 - 2 * b0) * (2 - (1 - 2 * b2));
  const double q = (1 - 2 * b1) * (2 - (1 - 2 * b3));
  return cplx{i, q} / std::sqrt(10.0);
}

ChainConfig small_chain() {
  ChainConfig c;
  c.n_data = 4;
  c.n_se = 1;
  c.n_fft = 8;
  c.oversample = 1;
  return c;
}

}  // namespace

TEST_CASE("map_bits: QPSK corner and energy") {
  const std::vector<std::uint8_t> b{0, 0};
  const auto s = map_bits(b, Modulation::qpsk);
  REQUIRE(s.values.size() == 1);
  CHECK(std::abs(s.values[0] - cplx{1.0, 1.0} / std::sqrt(2.0)) < 1e-15);

  const auto bits = random_bits(420, 3);
  const auto blk = map_bits(bits, Modulation::qpsk);
  CHECK(blk.values.size() == 210);
  CHECK(blk.stage == Stage::data_symbols);
  CHECK(testutil::energy(blk.values) / 210.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("map_bits: exhaustive 16-QAM against Gray table") {
  std::set<std::pair<double, double>> seen;
  double e = 0.0;
  for (unsigned l = 0; l < 16; ++l) {
    std::vector<std::uint8_t> b{static_cast<std::uint8_t>((l >> 3) & 1), static_cast<std::uint8_t>((l >> 2) & 1),
                                static_cast<std::uint8_t>((l >> 1) & 1), static_cast<std::uint8_t>(l & 1)};
    const auto s = map_bits(b, Modulation::qam16).values[0];
    CHECK(std::abs(s - gray16(l)) < 1e-15);
    seen.insert({s.real(), s.imag()});
    e += std::norm(s);
  }
  CHECK(seen.size() == 16);
  CHECK(e / 16.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("map_bits: 64-QAM unit energy and Gray neighbours") {
  const auto& pts = constellation(Modulation::qam64);
  REQUIRE(pts.size() == 64);
  double e = 0.0;
  for (const auto& p : pts) e += std::norm(p);
  CHECK(e / 64.0 == doctest::Approx(1.0).epsilon(1e-12));
  // Nearest neighbours differ in exactly one bit.
  const double dmin = 2.0 / std::sqrt(42.0);
  for (unsigned a = 0; a < 64; ++a) {
    for (unsigned b = a + 1; b < 64; ++b) {
      if (std::abs(std::abs(pts[a] - pts[b]) - dmin) < 1e-9) CHECK(__builtin_popcount(a ^ b) == 1);
    }
  }
}

TEST_CASE("map_bits: rejects ragged length") {
  const std::vector<std::uint8_t> b{0, 1, 1};
  CHECK_THROWS_AS(map_bits(b, Modulation::qpsk), std::invalid_argument);
  CHECK_THROWS_AS(map_bits(b, Modulation::qam16), std::invalid_argument);
}

TEST_CASE("dft_precode: DC block, Parseval, naive oracle") {
  ChainConfig c = small_chain();
  SymbolBlock ones{Stage::data_symbols, CVec(4, cplx{1.0, 0.0})};
  const auto s = dft_precode(ones, c);
  CHECK(s.stage == Stage::freq_domain);
  CHECK(std::abs(s.values[0] - cplx{2.0, 0.0}) < 1e-12);
  for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(s.values[k]) < 1e-12);

  ChainConfig def;
  const auto blk = map_bits(random_bits(420, 11), Modulation::qpsk);
  const auto f = dft_precode(blk, def);
  CHECK(testutil::rel_err(testutil::energy(f.values), testutil::energy(blk.values)) < 1e-10);

  auto ref = testutil::naive_dft(blk.values);
  double worst = 0.0;
  for (std::size_t k = 0; k < 210; ++k) worst = std::max(worst, std::abs(ref[k] / std::sqrt(210.0) - f.values[k]));
  CHECK(worst < 1e-9);

  const auto back = dft_deprecode(f, def);
  for (std::size_t i = 0; i < 210; ++i) CHECK(std::abs(back.values[i] - blk.values[i]) < 1e-10);

  SymbolBlock wrong{Stage::data_symbols, CVec(5)};
  CHECK_THROWS_AS(dft_precode(wrong, c), std::invalid_argument);
}

TEST_CASE("spectrum_extend: cyclic copy") {
  ChainConfig c = small_chain();
  const cplx a{1, 0}, b{2, 0}, cc{3, 0}, d{4, 0};
  SymbolBlock s{Stage::freq_domain, {a, b, cc, d}};
  const auto e = spectrum_extend(s, c);
  CHECK(e.stage == Stage::extended);
  const CVec expect{d, a, b, cc, d, a};
  CHECK(e.values == expect);

  ChainConfig z = c;
  z.n_se = 0;
  CHECK(spectrum_extend(s, z).values == s.values);

  ChainConfig def;
  const auto f = dft_precode(map_bits(random_bits(420, 5), Modulation::qpsk), def);
  const auto x = spectrum_extend(f, def);
  double copied = 0.0;
  for (std::size_t i = 0; i < 15; ++i) copied += std::norm(f.values[i]) + std::norm(f.values[195 + i]);
  CHECK(testutil::energy(x.values) == doctest::Approx(testutil::energy(f.values) + copied).epsilon(1e-12));
  // Head of the extended block repeats the tail of its middle section.
  for (std::size_t i = 0; i < 15; ++i) CHECK(x.values[i] == x.values[210 + i]);

  ChainConfig bad = c;
  bad.n_se = 4;
  CHECK_THROWS(spectrum_extend(s, bad));
}

TEST_CASE("apply_filter: elementwise") {
  const auto v = testutil::random_cvec(240, 2);
  SymbolBlock e{Stage::extended, v};
  const auto ones = apply_filter(e, unit_taps(240));
  CHECK(ones.stage == Stage::shaped);
  CHECK(ones.values == v);
  const auto zero = apply_filter(e, RVec(240, 0.0));
  for (const auto& z : zero.values) CHECK(z == cplx{0.0, 0.0});
  const auto f = testutil::random_rvec(240, 9);
  const auto y = apply_filter(e, f);
  for (std::size_t k = 0; k < 240; ++k) CHECK(y.values[k] == v[k] * f[k]);
  CHECK_THROWS_AS(apply_filter(e, RVec(239, 1.0)), std::invalid_argument);
}

TEST_CASE("to_time_domain: tone, Parseval, decimation") {
  ChainConfig c;
  SymbolBlock tone{Stage::shaped, CVec(240, cplx{0.0, 0.0})};
  tone.values[120] = 1.0;
  const auto t = to_time_domain(tone, c);
  CHECK(t.values.size() == c.grid_size());
  CHECK(std::abs(papr_db(t.values)) < 1e-9);

  SymbolBlock sh{Stage::shaped, testutil::random_cvec(240, 4)};
  const auto x4 = to_time_domain(sh, c);
  CHECK(testutil::rel_err(testutil::energy(x4.values), 4.0 * testutil::energy(sh.values)) < 1e-9);

  ChainConfig c1 = c;
  c1.oversample = 1;
  const auto x1 = to_time_domain(sh, c1);
  CHECK(testutil::rel_err(testutil::energy(x1.values), testutil::energy(sh.values)) < 1e-9);
  double worst = 0.0;
  for (std::size_t n = 0; n < 256; ++n) worst = std::max(worst, std::abs(x4.values[4 * n] - x1.values[n]));
  CHECK(worst < 1e-12);

  // Direct synthesis on the documented bin map.
  CVec grid(1024, cplx{0.0, 0.0});
  for (std::size_t k = 0; k < 240; ++k) {
    const long f = static_cast<long>(k) - 120;
    grid[static_cast<std::size_t>((f + 1024) % 1024)] = sh.values[k];
  }
  const auto ref = testutil::naive_dft(grid, true);
  worst = 0.0;
  for (std::size_t n = 0; n < 1024; ++n) worst = std::max(worst, std::abs(ref[n] / 16.0 - x4.values[n]));
  CHECK(worst < 1e-9);

  ChainConfig narrow = c;
  narrow.n_fft = 128;
  narrow.oversample = 4;
  CHECK_THROWS(to_time_domain(sh, narrow));
}

TEST_CASE("receiver_chain: noiseless loopback") {
  ChainConfig c;
  for (auto mod : {Modulation::qpsk, Modulation::qam16, Modulation::qam64}) {
    const auto bits = random_bits(210 * bits_per_symbol(mod), 21);
    const auto sent = map_bits(bits, mod);
    const auto labels = labels_from_bits(bits, mod);
    const auto rx = transmit(bits, mod, unit_taps(240), c);
    SymbolBlock r{Stage::received, rx.values};
    const auto out = receiver_chain(r, unit_taps(240), c, mod);
    CHECK(out.labels == labels);

    for (const auto& taps : {rrc_taps(240, 0.25), taps_from_coeffs(RVec{0.8, 0.05, -0.3, 0.0, 0.1}, 240)}) {
      const auto x = transmit(bits, mod, taps, c);
      const auto o = receiver_chain(SymbolBlock{Stage::received, x.values}, taps, c, mod);
      double worst = 0.0;
      for (std::size_t i = 0; i < 210; ++i) worst = std::max(worst, std::abs(o.equalized[i] - sent.values[i]));
      CHECK(worst < 1e-6);
      CHECK(o.labels == labels);
    }
  }
}

TEST_CASE("receiver_chain: round trip for any taps with min |F| > 0.1") {
  ChainConfig c;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto taps = testutil::random_rvec(240, 100 + seed, 0.1, 2.0);
    const auto mod = seed % 2 ? Modulation::qam16 : Modulation::qpsk;
    const auto bits = random_bits(210 * bits_per_symbol(mod), seed);
    const auto x = transmit(bits, mod, taps, c);
    const auto o = receiver_chain(SymbolBlock{Stage::received, x.values}, taps, c, mod);
    CHECK(o.labels == labels_from_bits(bits, mod));
  }
}

TEST_CASE("receiver_chain: zero gain is an equalization failure") {
  ChainConfig c;
  const auto bits = random_bits(420, 1);
  RVec taps(240, 1.0);
  const auto x = transmit(bits, Modulation::qpsk, taps, c);
  taps[100] = 0.0;  // data bin with a single copy
  CHECK_THROWS_AS(receiver_chain(SymbolBlock{Stage::received, x.values}, taps, c, Modulation::qpsk),
                  EqualizationError);
}

TEST_CASE("detect: minimum distance over every constellation point") {
  for (auto mod : {Modulation::qpsk, Modulation::qam16, Modulation::qam64}) {
    const auto& pts = constellation(mod);
    const auto labels = detect(pts, mod);
    for (unsigned i = 0; i < pts.size(); ++i) CHECK(labels[i] == i);
    // Perturbed probes: brute-force argmin as the oracle.
    const auto probes = testutil::random_cvec(500, 77, 0.8);
    const auto got = detect(probes, mod);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      unsigned best = 0;
      for (unsigned i = 1; i < pts.size(); ++i) {
        if (std::norm(probes[p] - pts[i]) < std::norm(probes[p] - pts[best])) best = i;
      }
      CHECK(got[p] == best);
    }
  }
}

TEST_CASE("receiver_chain: QPSK SER over AWGN at 10 dB matches closed form") {
  // Plain chain: every symbol sees complex noise variance 1/snr.
  ChainConfig c = ChainConfig{}.without_extension();
  ChannelCfg ch;
  ch.snr_db = 10.0;
  ch.seed = 99;
  const std::size_t blocks = 477;  // ~1e5 symbols
  std::size_t errors = 0, total = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto bits = random_bits(420, 1000 + b);
    const auto x = transmit(bits, Modulation::qpsk, unit_taps(210), c);
    const auto y = apply_channel(x, ch, c, b);
    const auto o = receiver_chain(y.received, unit_taps(210), c, Modulation::qpsk, y.fade);
    const auto s = measured_ser(labels_from_bits(bits, Modulation::qpsk), o.labels);
    errors += s.errors;
    total += s.total;
  }
  const double p = testutil::qpsk_ser(0.1);
  const double sem = std::sqrt(p * (1.0 - p) / static_cast<double>(total));
  const double ser = static_cast<double>(errors) / static_cast<double>(total);
  CHECK(std::abs(ser - p) <= 3.0 * sem);
}

TEST_CASE("receiver_chain: extended chain SER accounts for folded copies") {
  // With unit taps the 30 edge data bins are received twice, halving their
  // noise; the per-symbol noise after the inverse precode is the bin average.
  ChainConfig c;
  ChannelCfg ch;
  ch.snr_db = 8.0;
  ch.seed = 7;
  const double snr = std::pow(10.0, 0.8);
  double expected = 0.0;
  std::size_t errors = 0, total = 0;
  const std::size_t blocks = 400;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto bits = random_bits(420, 5000 + b);
    const auto s_ext = spectrum_extend(dft_precode(map_bits(bits, Modulation::qpsk), c), c);
    const double q = testutil::energy(s_ext.values);
    const double nu = q / (240.0 * snr);
    expected += testutil::qpsk_ser(nu * (180.0 + 30.0 * 0.5) / 210.0);
    const auto x = transmit(bits, Modulation::qpsk, unit_taps(240), c);
    const auto y = apply_channel(x, ch, c, b);
    const auto o = receiver_chain(y.received, unit_taps(240), c, Modulation::qpsk, y.fade);
    const auto s = measured_ser(labels_from_bits(bits, Modulation::qpsk), o.labels);
    errors += s.errors;
    total += s.total;
  }
  const double p = expected / static_cast<double>(blocks);
  const double sem = std::sqrt(p * (1.0 - p) / static_cast<double>(total));
  CHECK(std::abs(static_cast<double>(errors) / static_cast<double>(total) - p) <= 3.0 * sem);
}

TEST_CASE("ChainConfig: validation") {
  ChainConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_fft = 200;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ChainConfig{};
  c.oversample = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ChainConfig{};
  c.n_data = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("fft: radix-2 and Bluestein against the naive DFT") {
  for (std::size_t n : {1u, 2u, 8u, 210u, 256u, 243u}) {
    const auto x = testutil::random_cvec(n, n);
    auto y = x;
    fft_plan(n).forward(y);
    const auto ref = testutil::naive_dft(x);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(y[k] - ref[k]));
    CHECK(worst < 1e-9 * static_cast<double>(n));
    fft_plan(n).inverse(y);
    worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(y[k] / static_cast<double>(n) - x[k]));
    CHECK(worst < 1e-11);
  }
}
