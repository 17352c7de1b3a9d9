#include <benchmark/benchmark.h>

#include "rangeforge/netrange.hpp"

using namespace rangeforge;

namespace {

netrange::NetConfig bench_config(SimTime duration) {
    netrange::NetConfig cfg;
    cfg.duration = duration;
    cfg.background_hosts = 1600;
    cfg.emulated_hosts = 400;
    cfg.seed = 3;
    return cfg;
}

void BM_BuildTimeline(benchmark::State& state) {
    const auto cfg = bench_config(seconds(state.range(0)));
    std::size_t segments = 0;
    for (auto _ : state) {
        auto timeline = netrange::build_timeline(cfg);
        segments = timeline.segments.size();
        benchmark::DoNotOptimize(segments);
    }
    state.counters["segments"] = static_cast<double>(segments);
}

void BM_Fanout(benchmark::State& state) {
    auto timeline = netrange::build_timeline(bench_config(seconds(60)));
    std::vector<std::string> devices;
    for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
        devices.push_back("dev-" + std::to_string(i));
    }
    for (auto _ : state) {
        auto streams = netrange::fanout(timeline, devices);
        benchmark::DoNotOptimize(streams.front().digest);
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(timeline.segments.size()) *
                            state.range(0));
}

}  // namespace

BENCHMARK(BM_BuildTimeline)->Arg(120)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fanout)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
