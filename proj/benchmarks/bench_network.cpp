#include <benchmark/benchmark.h>

#include "weakclr/network.hpp"
#include "weakclr/rng.hpp"

using namespace weakclr;

namespace {

Tensor4<float> random_batch(int n, int side, std::uint64_t seed) {
    Tensor4<float> x(n, 1, side, side);
    Rng rng(seed);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform());
    return x;
}

void BM_BackboneForward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int side = static_cast<int>(state.range(1));
    const auto model = init_model(1);
    const auto x = random_batch(n, side, 2);
    for (auto _ : state) benchmark::DoNotOptimize(backbone_forward(model.params, x));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BackboneForward)->Args({92, 64})->Args({8, 128})->Unit(benchmark::kMillisecond);

void BM_BackboneForwardBackward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int side = static_cast<int>(state.range(1));
    const auto model = init_model(1);
    const auto x = random_batch(n, side, 2);
    auto grads = ModelParams<float>::zeros();
    for (auto _ : state) {
        BackboneTrace<float> trace;
        const Matrix<float> repr = backbone_forward(model.params, x, &trace);
        Matrix<float> d(repr.rows, repr.cols, 1.0f / static_cast<float>(repr.data.size()));
        backbone_backward(model.params, trace, d, grads);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BackboneForwardBackward)->Args({92, 64})->Args({276, 64})->Unit(benchmark::kMillisecond);

void BM_Heads(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto model = init_model(1);
    Matrix<float> repr(n, kReprDim);
    Rng rng(3);
    for (auto& v : repr.data) v = static_cast<float>(rng.uniform());
    for (auto _ : state) {
        benchmark::DoNotOptimize(ssl_head_forward(model.params, repr));
        benchmark::DoNotOptimize(cls_head_forward(model.params, repr));
    }
}
BENCHMARK(BM_Heads)->Arg(184);

} // namespace
