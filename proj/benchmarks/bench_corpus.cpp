#include <benchmark/benchmark.h>

#include "rangeforge/corpus.hpp"

using namespace rangeforge;

namespace {

void BM_Synthesize(benchmark::State& state) {
    corpus::SyntheticSpec spec;
    spec.records = static_cast<std::size_t>(state.range(0));
    spec.zero_days = 1000;
    spec.seed = 1;
    for (auto _ : state) {
        auto built = corpus::synthesize(spec);
        benchmark::DoNotOptimize(built.manifest.records.size());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StratifiedSample(benchmark::State& state) {
    corpus::SyntheticSpec spec;
    spec.records = 260000;
    spec.seed = 1;
    auto built = corpus::synthesize(spec);
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto set = corpus::stratified_sample(built.manifest, n, 0.5, std::nullopt, 7);
        benchmark::DoNotOptimize(set.samples.size());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Synthesize)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StratifiedSample)->Arg(100000)->Unit(benchmark::kMillisecond);
