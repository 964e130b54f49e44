#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "tinyshape/checkpoint.hpp"
#include "tinyshape/evaluation.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/trainer.hpp"

using namespace tinyshape;

namespace {

TrainConfig smoke(std::uint64_t seed = 1) {
  TrainConfig t;
  t.n_blocks = 500;
  t.epochs = 2;
  t.seed = seed;
  return t;
}

std::string bytes(const Checkpoint& c) {
  std::ostringstream os;
  write_checkpoint(os, c);
  return os.str();
}

double median(RVec v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("generate_block: deterministic and distributed per config") {
  ChainConfig c;
  TrainConfig t;
  t.seed = 42;
  const auto a = generate_block(t, c, 17);
  const auto b = generate_block(t, c, 17);
  CHECK(a.bits == b.bits);
  CHECK(a.channel.snr_db == b.channel.snr_db);
  CHECK(a.scheme == b.scheme);
  CHECK(a.channel.model == b.channel.model);

  double snr = 0.0;
  std::size_t rayleigh = 0, qam16 = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto d = generate_block(t, c, i);
    CHECK(d.channel.snr_db >= 0.0);
    CHECK(d.channel.snr_db <= 20.0);
    CHECK(d.bits.size() == 210u * static_cast<std::size_t>(bits_per_symbol(d.scheme)));
    snr += d.channel.snr_db;
    rayleigh += d.channel.model == ChannelModel::rayleigh;
    qam16 += d.scheme == Modulation::qam16;
  }
  CHECK(std::abs(snr / 10000.0 - 10.0) < 0.2);
  CHECK(std::abs(static_cast<double>(rayleigh) / 10000.0 - 0.5) < 0.03);
  CHECK(std::abs(static_cast<double>(qam16) / 10000.0 - 0.5) < 0.03);

  t.mod_mix = ModMix{1.0, 0.0};
  t.channel_mix = ChannelMix{0.0, 0.0, 1.0, 3.0};
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto d = generate_block(t, c, i);
    CHECK(d.scheme == Modulation::qpsk);
    CHECK(d.channel.model == ChannelModel::rician);
    CHECK(d.channel.k_factor_db.value() == 3.0);
  }
}

TEST_CASE("block_loss: gradient through the full chain matches central differences") {
  ChainConfig c;
  TrainConfig t;
  t.seed = 9;
  t.channel_mix = ChannelMix{0.4, 0.3, 0.3, 3.0};
  for (std::uint64_t b = 0; b < 10; ++b) {
    const auto draw = generate_block(t, c, b);
    const auto freq = dft_precode(map_bits(draw.bits, draw.scheme), c);
    const RVec coeffs = testutil::random_rvec(5, 60 + b, -0.3, 0.3);
    RVec r = coeffs;
    r[0] += 1.0;
    const LossParams lp{lookup_lambda(LambdaTable{}, draw.channel.snr_db), 6.0, 1.0};
    const auto bl = block_loss(r, freq, draw, c, lp);
    CHECK(bl.loss == doctest::Approx(bl.mse + lp.lambda * bl.surrogate));
    for (std::size_t z = 0; z < 5; ++z) {
      RVec up = r, dn = r;
      up[z] += 1e-6;
      dn[z] -= 1e-6;
      const double fd = (block_loss(up, freq, draw, c, lp).loss - block_loss(dn, freq, draw, c, lp).loss) / 2e-6;
      CHECK(testutil::rel_err(bl.grad_coeffs[z], fd, 1e-6) < 1e-3);
    }
  }
}

TEST_CASE("block_loss: expected MSE matches the Monte-Carlo receiver") {
  // Noise-averaged training MSE against the mean of the realized MSE over
  // many independent noise draws through the real receiver.
  ChainConfig c;
  TrainConfig t;
  t.seed = 3;
  t.channel_mix = ChannelMix{1.0, 0.0, 0.0, 3.0};
  auto draw = generate_block(t, c, 0);
  draw.channel.snr_db = 6.0;
  const RVec r{0.9, 0.0, -0.35, 0.0, 0.05};
  const auto taps = taps_from_coeffs(r, 240);
  const auto freq = dft_precode(map_bits(draw.bits, draw.scheme), c);
  const auto bl = block_loss(r, freq, draw, c, LossParams{0.3, 6.0, 1.0});
  const auto x = transmit(draw.bits, draw.scheme, taps, c);
  const auto sent = map_bits(draw.bits, draw.scheme);
  double acc = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const auto y = apply_channel(x, draw.channel, c, static_cast<std::uint64_t>(i));
    const auto o = receiver_chain(y.received, taps, c, draw.scheme, y.fade);
    acc += mse_e(sent.values, o.equalized);
  }
  CHECK(std::abs(acc / n / bl.mse - 1.0) < 0.02);
}

TEST_CASE("net_block_loss: every network parameter through the chain") {
  ChainConfig c;
  TrainConfig t;
  t.seed = 21;
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto p = NetParams::init(NetShape{241, 10, 5}, 100 + s);
    for (auto& w : p.layers[1].weights) w *= 20.0;
    if (s == 2) prune_to(p, 0.8);
    const auto draw = generate_block(t, c, s);
    const LossParams lp{0.5, 6.0, 1.0};
    const auto res = net_block_loss(p, draw, c, lp);
    double worst = 0.0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& L = p.layers[l];
      for (std::size_t i = 0; i < L.weights.size(); i += (l == 0 ? 7 : 1)) {
        if (!L.mask[i]) continue;
        const double w = L.weights[i];
        L.weights[i] = w + 1e-6;
        const double up = net_block_loss(p, draw, c, lp).loss.loss;
        L.weights[i] = w - 1e-6;
        const double dn = net_block_loss(p, draw, c, lp).loss.loss;
        L.weights[i] = w;
        worst = std::max(worst, testutil::rel_err(res.grads.weights[l][i], (up - dn) / 2e-6, 1e-6));
      }
      for (std::size_t i = 0; i < L.bias.size(); ++i) {
        const double b = L.bias[i];
        L.bias[i] = b + 1e-6;
        const double up = net_block_loss(p, draw, c, lp).loss.loss;
        L.bias[i] = b - 1e-6;
        const double dn = net_block_loss(p, draw, c, lp).loss.loss;
        L.bias[i] = b;
        worst = std::max(worst, testutil::rel_err(res.grads.bias[l][i], (up - dn) / 2e-6, 1e-6));
      }
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("train: lr = 0 leaves parameters unchanged") {
  ChainConfig c;
  auto t = smoke(5);
  t.epochs = 1;
  t.n_blocks = 64;
  t.adam.lr = 0.0;
  t.prune.mode = PruneMode::per_epoch;
  t.prune.per_epoch_fraction = 0.0;
  const auto r = train(t, c);
  auto init = NetParams::init(NetShape{241, 10, 5}, 5);
  OptState opt = OptState::for_params(init, t.adam);
  snap_to_float32(init, opt);
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    CHECK(r.checkpoint.params.layers[l].weights == init.layers[l].weights);
    CHECK(r.checkpoint.params.layers[l].bias == init.layers[l].bias);
  }
}

TEST_CASE("train: smoke run improves and lands on 492 live weights") {
  ChainConfig c;
  const auto r = train(smoke(), c);
  REQUIRE(r.batch_losses.size() == 2);
  CHECK(median(r.batch_losses.back()) < median(r.batch_losses.front()));
  CHECK(r.checkpoint.params.live_weight_count() == 492);
  CHECK(r.checkpoint.history.size() == 2);
  CHECK(r.checkpoint.history.back().sparsity == doctest::Approx(0.8).epsilon(1e-3));
  CHECK(r.checkpoint.epoch == 2);
  CHECK(r.checkpoint.config_hash == smoke().hash());

  // Quantized twin is the quantization of the final parameters.
  const auto q = quantize(r.checkpoint.params);
  CHECK(q.layers[0].weights == r.checkpoint.qnet.layers[0].weights);
}

TEST_CASE("train: per-epoch schedule prunes 20% of the remainder") {
  ChainConfig c;
  auto t = smoke();
  t.n_blocks = 64;
  t.epochs = 3;
  t.prune.mode = PruneMode::per_epoch;
  const auto r = train(t, c);
  CHECK(r.checkpoint.params.live_weight_count() == 1259);
}

TEST_CASE("train: identical checkpoint for 1, 2 and 8 threads") {
  ChainConfig c;
  auto t = smoke(7);
  t.n_blocks = 200;
  std::string ref;
  for (unsigned th : {1u, 2u, 8u}) {
    t.threads = th;
    const auto s = bytes(train(t, c).checkpoint);
    if (ref.empty()) ref = s;
    CHECK(s == ref);
  }
}

TEST_CASE("train: non-finite state aborts with a diagnostic") {
  ChainConfig c;
  auto t = smoke();
  t.n_blocks = 96;
  t.adam.lr = 1e300;
  t.grad_clip = 0.0;
  try {
    train(t, c);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("block") != std::string::npos);
    CHECK(msg.find("parameter norm") != std::string::npos);
  }
}

TEST_CASE("TrainConfig: validation and hash") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  auto bad = t;
  bad.channel_mix.awgn = 0.7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = t;
  bad.snr_lo_db = 30.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = t;
  bad.n_blocks = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  auto other = t;
  other.threads = 8;
  CHECK(other.hash() == t.hash());
  other.seed = 1;
  CHECK(other.hash() != t.hash());
}

TEST_CASE("evaluate: 64-QAM with a QPSK/16-QAM checkpoint, paired noise") {
  ChainConfig c;
  auto t = smoke();
  t.n_blocks = 64;
  t.epochs = 1;
  const auto ck = train(t, c).checkpoint;
  const auto net = network_scheme("tinyml", InferenceNet(ck.qnet), c);
  const auto unit = static_scheme("unit", unit_taps(240), c);
  ChannelCfg ch;
  ch.snr_db = 15.0;
  ch.seed = 4;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto bits = block_bits(3, i, Modulation::qam64, c);
    const auto a = simulate_block(net, bits, Modulation::qam64, 15.0, &ch, i);
    const auto b = simulate_block(unit, bits, Modulation::qam64, 15.0, &ch, i);
    CHECK(a.unit_noise_energy == b.unit_noise_energy);
    CHECK(a.papr_db != b.papr_db);
    CHECK(a.ser.total == 210);
  }
  EvalConfig e;
  e.ccdf_blocks = 50;
  e.paired_blocks = 20;
  e.oobe_blocks = 10;
  e.ser_blocks = 5;
  e.snr_db = {10.0};
  e.channels = {ChannelModel::rician};
  e.mods = {Modulation::qam64};
  const std::vector<Scheme> schemes{net, unit};
  const auto rep = evaluate(schemes, e);
  CHECK(rep.cells.size() == 2);
  CHECK(rep.schemes.at("tinyml").ccdf_samples.size() == 50);
}
