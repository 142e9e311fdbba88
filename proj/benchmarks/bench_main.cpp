// SPDX-License-Identifier: Apache-2.0
// Microbenchmarks: dense vs sparse inference, WMMSE and the tape matmul.
#include <benchmark/benchmark.h>

#include "cfmimo/autodiff.hpp"
#include "cfmimo/dataset.hpp"
#include "cfmimo/inference.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/wmmse.hpp"

namespace {

using namespace cfmimo;

const Dataset& pc_data() {
  static const Dataset d = generate_power_control_dataset(ScenarioConfig{}, 1, 2, 64);
  return d;
}

GnnModel pc_model(double tau) {
  const auto& m = pc_data().manifest;
  ModelConfig c;
  BranchSpec b;
  b.shape = {m.num_aps(), m.num_ues(), m.num_antennas()};
  b.tau = tau;
  b.p_max = m.p_max();
  b.noise_power = m.noise_power();
  c.branches = {b};
  auto model = init_model(c, 3);
  // Spread sigmoid(W) over (0.27, 0.88) so tau decides how many links stay.
  CounterRng rng(4);
  for (auto& v : model.branches[0].sparse.w.data()) v = -1.0 + 3.0 * rng.uniform();
  return model;
}

void BM_Inference(benchmark::State& state) {
  const double tau = static_cast<double>(state.range(0)) / 100.0;
  const InferenceEngine engine(pc_model(tau));
  const auto& samples = pc_data().samples;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(engine.run(Task::kPowerControl, samples[i++ % samples.size()]));
  }
  state.counters["retained"] = static_cast<double>(engine.retained_links(Task::kPowerControl));
}
BENCHMARK(BM_Inference)->Arg(0)->Arg(50)->Arg(63)->Arg(70)->Unit(benchmark::kMicrosecond);

void BM_Wmmse(benchmark::State& state) {
  const auto& d = pc_data();
  std::size_t i = 0;
  double iters = 0.0;
  for (auto _ : state) {
    auto r = wmmse_solve(d.samples[i++ % d.samples.size()], d.manifest.p_max(), d.manifest.noise_power());
    iters += static_cast<double>(r.iterations);
  }
  state.counters["iterations"] = benchmark::Counter(iters, benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_Wmmse)->Unit(benchmark::kMillisecond);

void BM_TapeMatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  RealTensor a({64, n}), b({n, n});
  for (auto& v : a.data()) v = rng.uniform();
  for (auto& v : b.data()) v = rng.uniform();
  for (auto _ : state) {
    Tape t;
    auto x = t.leaf(a);
    auto w = t.leaf(b);
    auto y = t.sum(t.sum(t.matmul(x, w), 0), 1);
    benchmark::DoNotOptimize(t.backward(y));
  }
}
BENCHMARK(BM_TapeMatmul)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
