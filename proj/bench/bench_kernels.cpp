#include <benchmark/benchmark.h>

#include "snprex/encoder.hpp"
#include "snprex/kernels.hpp"
#include "snprex/rng.hpp"
#include "snprex/train.hpp"

using namespace snprex;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& x : t.values()) x = rng.uniform(-1.0, 1.0);
  return t;
}

kernels::Backend backend_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Backend::Serial : kernels::Backend::OpenMP;
}

// Sentence-level shapes with the default head: L=70, d=768, F=128, k=3.
void BM_ConvForward(benchmark::State& state) {
  const Tensor E = random_tensor({70, 768}, 1), K = random_tensor({3, 768, 128}, 2), b = random_tensor({128}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv1d_forward(E, 70, K, b, backend_of(state)));
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

void BM_ConvBackward(benchmark::State& state) {
  const Tensor E = random_tensor({70, 768}, 1), K = random_tensor({3, 768, 128}, 2), b = random_tensor({128}, 3);
  const Tensor out = kernels::conv1d_forward(E, 70, K, b);
  const Tensor d_out = random_tensor({70, 128}, 4);
  Tensor dK(K.shape()), db(b.shape()), dE(E.shape());
  for (auto _ : state) {
    kernels::conv1d_backward(E, 70, K, out, d_out, dK, db, dE, backend_of(state));
    benchmark::ClobberMemory();
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

// One epoch over 64 instances with a frozen hashing encoder.
void BM_TrainEpoch(benchmark::State& state) {
  Rng rng(5);
  std::vector<TokenizedInstance> set;
  for (int i = 0; i < 64; ++i) {
    TokenizedInstance inst;
    inst.candidate_ref = "c" + std::to_string(i);
    inst.class_id = i % 2;
    inst.true_length = 30;
    inst.token_ids.assign(70, 0);
    for (int t = 0; t < 30; ++t) inst.tokens.push_back("w" + std::to_string(rng.below(500)));
    set.push_back(std::move(inst));
  }
  HashingEncoder enc(EncoderSpec{});
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.backend = backend_of(state);
  const HeadConfig head;
  for (auto _ : state) benchmark::DoNotOptimize(train(set, enc, head, cfg));
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

}  // namespace

BENCHMARK(BM_ConvForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
