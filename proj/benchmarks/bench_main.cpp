#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "tinyshape/evaluation.hpp"
#include "tinyshape/fft.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/rng.hpp"
#include "tinyshape/tinynet.hpp"
#include "tinyshape/trainer.hpp"

using namespace tinyshape;

namespace {

CVec random_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  CVec x(n);
  for (auto& v : x) v = complex_normal(rng);
  return x;
}

void BM_FftForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Fft& fft = fft_plan(n);
  const CVec input = random_signal(n, 1);
  CVec work(n);
  for (auto _ : state) {
    work = input;
    fft.forward(work);
    benchmark::DoNotOptimize(work.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FftForward)->Arg(210)->Arg(256)->Arg(1024);

void BM_Transmit(benchmark::State& state) {
  const ChainConfig chain;
  const RVec taps = rrc_taps(chain.n_sk(), 0.25);
  const auto bits = block_bits(7, 0, Modulation::qpsk, chain);
  for (auto _ : state) {
    auto x = transmit(bits, Modulation::qpsk, taps, chain);
    benchmark::DoNotOptimize(x.values.data());
  }
}
BENCHMARK(BM_Transmit);

void BM_Forward(benchmark::State& state) {
  const NetParams params = NetParams::init({241, 10, 5}, 3);
  const QuantizedNet qnet = quantize(params);
  const bool quantized = state.range(0) != 0;
  RVec input(241, 0.5);
  for (auto _ : state) {
    auto out = quantized ? forward_q(qnet, input) : forward(params, input);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1);

void BM_TrainBlock(benchmark::State& state) {
  const ChainConfig chain;
  TrainConfig cfg;
  const NetParams params = NetParams::init({chain.n_sk() + 1, 10, 5}, 3);
  const auto draw = generate_block(cfg, chain, 0);
  const LossParams lp{0.5, 6.0, 1.0};
  for (auto _ : state) {
    auto r = net_block_loss(params, draw, chain, lp);
    benchmark::DoNotOptimize(r.loss.loss);
  }
}
BENCHMARK(BM_TrainBlock);

}  // namespace
BENCHMARK_MAIN();
