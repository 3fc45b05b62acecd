// Microbenchmarks for the hot paths: convolution forward/backward, the dense
// layer, gap-filling, the Adam update and forest fitting.
#include "sits/architectures.hpp"
#include "sits/forest.hpp"
#include "sits/layers.hpp"
#include "sits/network.hpp"
#include "sits/preprocess.hpp"
#include "sits/rng.hpp"
#include "sits/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace sits;

Tensor3 random_tensor(Rng& rng, int n, int t, int d) {
    Tensor3 x(n, t, d);
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    return x;
}

void BM_Conv1dForward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    Rng rng(1);
    ConvLayerParams p = ConvLayerParams::create(5, 64, 64);
    for (auto& w : p.weights) w = rng.uniform(-1, 1);
    const Tensor3 x = random_tensor(rng, batch, 149, 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv1d_forward(x, p));
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Conv1dForward)->Arg(8)->Arg(32)->Arg(128);

void BM_Conv1dBackward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    Rng rng(2);
    ConvLayerParams p = ConvLayerParams::create(5, 64, 64);
    for (auto& w : p.weights) w = rng.uniform(-1, 1);
    const Tensor3 x = random_tensor(rng, batch, 149, 64);
    const Tensor3 g = random_tensor(rng, batch, 149, 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv1d_backward(x, p, g));
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Conv1dBackward)->Arg(8)->Arg(32)->Arg(128);

void BM_DenseForward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    Rng rng(3);
    DenseLayerParams p = DenseLayerParams::create(9536, 256);
    for (auto& w : p.weights) w = rng.uniform(-1, 1);
    const Tensor3 x = random_tensor(rng, batch, 1, 9536);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dense_forward(x, p));
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenseForward)->Arg(8)->Arg(32)->Arg(128);

void BM_AdamStep(benchmark::State& state) {
    Rng rng(4);
    std::vector<double> params(2'500'000), grads(params.size());
    for (auto& v : params) v = rng.uniform(-1, 1);
    for (auto& v : grads) v = rng.uniform(-1, 1);
    AdamState adam = AdamState::create(params.size());
    for (auto _ : state) {
        adam_step(params, grads, adam, {});
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long long>(params.size()));
}
BENCHMARK(BM_AdamStep);

void BM_LinearGapfill(benchmark::State& state) {
    SceneSpec spec = default_scene();
    spec.cloud_probability = 0.3;
    const Dataset ds = generate_scene(spec, 7);
    const auto target =
        std::make_shared<AcquisitionCalendar>(AcquisitionCalendar::resample(ds.calendar(), 2));
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(linear_gapfill(ds.samples[i % ds.samples.size()].series, target));
        ++i;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LinearGapfill);

void BM_ForestFit(benchmark::State& state) {
    const int trees = static_cast<int>(state.range(0));
    Rng rng(5);
    FlatFeatures flat;
    flat.rows = 500;
    flat.cols = 138;
    flat.values.resize(static_cast<std::size_t>(flat.rows) * flat.cols);
    for (auto& v : flat.values) v = rng.uniform(0, 1);
    flat.labels.resize(flat.rows);
    for (int i = 0; i < flat.rows; ++i) {
        flat.labels[i] = i % 4;
        flat.values[static_cast<std::size_t>(i) * flat.cols] += flat.labels[i];
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_forest(flat, 4, trees, 9));
    }
    state.SetItemsProcessed(state.iterations() * trees);
}
BENCHMARK(BM_ForestFit)->Arg(10)->Arg(50);

} // namespace

BENCHMARK_MAIN();
