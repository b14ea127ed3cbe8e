// Kernel and whole-model microbenchmarks (wall-clock characterization only; the
// acceptance numbers come from the reference CSV, not from these timings).
#include <benchmark/benchmark.h>

#include "oninfer/interpret.hpp"
#include "oninfer/opcount.hpp"
#include "oninfer/quantize.hpp"
#include "oninfer/rng.hpp"
#include "oninfer/zoo.hpp"

using namespace oninfer;

namespace {

Tensor rand_tensor(const Shape& s, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t = Tensor::zeros(s);
  for (auto& v : t.f) v = rng.uniform(lo, hi);
  return t;
}

void BM_Conv2D(benchmark::State& state) {
  int ch = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor x = rand_tensor(Shape({ch, 32, 32}), rng);
  Tensor w = rand_tensor(Shape({ch, ch, 3, 3}), rng);
  Tensor b = rand_tensor(Shape({ch}), rng);
  for (auto _ : state) {
    Tensor y = conv2d_forward(x, w, &b, {1, 1}, {1, 1});
    benchmark::DoNotOptimize(y.f.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{2} * ch * ch * 9 * 32 * 32);
}
BENCHMARK(BM_Conv2D)->Arg(4)->Arg(16);

void BM_Conv3D(benchmark::State& state) {
  Rng rng(2);
  Tensor x = rand_tensor(Shape({4, 8, 16, 16}), rng);
  Tensor w = rand_tensor(Shape({8, 4, 3, 3, 3}), rng);
  Tensor b = rand_tensor(Shape({8}), rng);
  for (auto _ : state) {
    Tensor y = conv3d_forward(x, w, &b, {1, 1, 1}, {1, 1, 1});
    benchmark::DoNotOptimize(y.f.data());
  }
}
BENCHMARK(BM_Conv3D);

void BM_MaxPool2D(benchmark::State& state) {
  Rng rng(3);
  Tensor x = rand_tensor(Shape({16, 64, 64}), rng);
  for (auto _ : state) {
    Tensor y = pool_forward(x, {2, 2}, {2, 2}, {0, 0}, 2);
    benchmark::DoNotOptimize(y.f.data());
  }
}
BENCHMARK(BM_MaxPool2D);

void BM_Dense(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Rng rng(4);
  Tensor x = rand_tensor(Shape({n}), rng);
  Tensor w = rand_tensor(Shape({n / 2, n}), rng);
  Tensor b = rand_tensor(Shape({n / 2}), rng);
  for (auto _ : state) {
    Tensor y = dense_forward(x, w, &b);
    benchmark::DoNotOptimize(y.f.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{2} * n * (n / 2));
}
BENCHMARK(BM_Dense)->Arg(256)->Arg(1024);

void BM_ZooForward(benchmark::State& state, ZooModelId id) {
  ModelFile m = build_zoo_model(id);
  Rng rng(5);
  std::map<std::string, Tensor> in;
  for (const auto& gi : m.graph.inputs) in[gi.name] = rand_tensor(gi.shape, rng, 0.0f, 1.0f);
  for (auto _ : state) {
    RunResult r = run_graph(m.graph, in);
    benchmark::DoNotOptimize(r.outputs.data());
  }
  state.SetItemsProcessed(state.iterations() * count_operations(m.graph));
}
BENCHMARK_CAPTURE(BM_ZooForward, multi_esperta, ZooModelId::MultiEsperta);
BENCHMARK_CAPTURE(BM_ZooForward, logistic_net, ZooModelId::LogisticNet);
BENCHMARK_CAPTURE(BM_ZooForward, reduced_net, ZooModelId::ReducedNet);
BENCHMARK_CAPTURE(BM_ZooForward, vae_encoder, ZooModelId::VaeEncoder);

void BM_QuantizedForward(benchmark::State& state) {
  ModelFile m = build_zoo_model(ZooModelId::LogisticNet);
  Rng rng(6);
  std::vector<std::map<std::string, Tensor>> calib;
  for (int i = 0; i < 4; ++i) {
    std::map<std::string, Tensor> s;
    for (const auto& gi : m.graph.inputs) s[gi.name] = rand_tensor(gi.shape, rng, 0.0f, 1.0f);
    calib.push_back(std::move(s));
  }
  QuantizedGraph q = quantize_graph(m.graph, calibrate(m.graph, calib));
  for (auto _ : state) {
    std::vector<Tensor> out = run_quantized(q, calib[0]);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_QuantizedForward);

}  // namespace

BENCHMARK_MAIN();
