#include <benchmark/benchmark.h>

#include <random>

#include "canet/cam.hpp"
#include "canet/canet_model.hpp"
#include "canet/ops.hpp"

namespace canet {
namespace {

Tensor random_tensor(Shape s, std::uint64_t seed) {
  Tensor t(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (double& v : t.data()) v = nd(rng);
  return t;
}

// Args: channels, extent.
void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor({2, c, hw, hw}, 1);
  const Tensor w = random_tensor({c, c, 3, 3}, 2);
  for (auto _ : state) {
    Tape tape;
    Var y = conv2d(tape.constant(x), tape.constant(w), std::nullopt, {1, 1, 1, 1});
    benchmark::DoNotOptimize(y.value().ptr());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * 2 * c * c * 9 * hw * hw);
}
BENCHMARK(BM_Conv3x3)->Args({16, 32})->Args({64, 32})->Args({128, 16});

void BM_Conv3x3Backward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  Parameter x{"x", "bench", random_tensor({2, c, hw, hw}, 1), {}};
  Parameter w{"w", "bench", random_tensor({c, c, 3, 3}, 2), {}};
  const Tensor probe = random_tensor({2, c, hw, hw}, 3);
  for (auto _ : state) {
    x.zero_grad();
    w.zero_grad();
    Tape tape;
    Var y = conv2d(tape.param(x), tape.param(w), std::nullopt, {1, 1, 1, 1});
    tape.backward(inner_product(y, probe));
    benchmark::DoNotOptimize(w.grad.ptr());
  }
}
BENCHMARK(BM_Conv3x3Backward)->Args({16, 32})->Args({64, 32});

void BM_Bilinear(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 64, hw, hw}, 4);
  for (auto _ : state) {
    Tensor y = resize_bilinear(x, 8 * hw, 8 * hw);
    benchmark::DoNotOptimize(y.ptr());
  }
}
BENCHMARK(BM_Bilinear)->Arg(8)->Arg(16);

void BM_CamForward(benchmark::State& state) {
  CamConfig cfg;
  cfg.scales = {2, 4, 8, 16};
  cfg.width = 64;
  cfg.fsm_channels = 64;
  cfg.topology = static_cast<Topology>(state.range(0));
  ModelGraph g(5);
  Cam cam(g, cfg, 128);
  const Tensor shared = random_tensor({2, 128, 16, 16}, 6);
  for (auto _ : state) {
    Tape tape;
    Var y = cam.forward(tape.constant(shared), BnMode::kEval);
    benchmark::DoNotOptimize(y.value().ptr());
  }
  state.SetLabel(to_string(cfg.topology));
}
BENCHMARK(BM_CamForward)->DenseRange(0, 2);

void BM_ToyTrainStep(benchmark::State& state) {
  CanetModel model(CanetConfig::toy(5), 7);
  const Tensor image = random_tensor({4, 3, 64, 64}, 8);
  LabelMap labels(4, 64, 64, 1);
  for (auto _ : state) {
    model.graph().zero_grad();
    Tape tape;
    CanetOutputs out = model.forward(tape.constant(image), BnMode::kTrain);
    Var loss = softmax_cross_entropy(out.logits, labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value().ptr());
  }
}
BENCHMARK(BM_ToyTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace canet

BENCHMARK_MAIN();
