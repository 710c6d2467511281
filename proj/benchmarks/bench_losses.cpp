#include <benchmark/benchmark.h>

#include <cmath>

#include "weakclr/losses.hpp"
#include "weakclr/rng.hpp"

using namespace weakclr;

namespace {

Matrix<float> unit_rows(int rows, int dim, std::uint64_t seed) {
    Matrix<float> z(rows, dim);
    Rng rng(seed);
    for (int r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (auto& v : z.row(r)) {
            v = static_cast<float>(rng.normal());
            norm += static_cast<double>(v) * v;
        }
        for (auto& v : z.row(r)) v = static_cast<float>(v / std::sqrt(norm));
    }
    return z;
}

void BM_NtXent(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    const auto z = unit_rows(rows, 128, 1);
    Matrix<float> g;
    for (auto _ : state) benchmark::DoNotOptimize(ntxent(z, 0.1, &g));
}
BENCHMARK(BM_NtXent)->Arg(16)->Arg(184);

void BM_SupCon(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    const auto z = unit_rows(rows, 128, 1);
    std::vector<int> labels(rows);
    for (int i = 0; i < rows; ++i) labels[i] = (i / 2) % 2;
    Matrix<float> g;
    for (auto _ : state) benchmark::DoNotOptimize(supcon(z, labels, 0.1, &g));
}
BENCHMARK(BM_SupCon)->Arg(16)->Arg(184);

} // namespace
