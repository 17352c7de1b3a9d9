#include <benchmark/benchmark.h>

#include <sstream>

#include "rangeforge/scheduler.hpp"

#include "../tests/test_util.hpp"

using namespace rangeforge;

namespace {

void BM_RunChallenge(benchmark::State& state) {
    testutil::ToyOptions opt;
    opt.samples = static_cast<int>(state.range(0));
    opt.nodes = 8;
    opt.capacity = 50;
    opt.limits = scheduler::Limits{2000, 600, 2000, 3};
    opt.static_hit = 0.4;
    opt.dynamic_hit = 0.3;
    opt.fp_rate = 0.05;
    opt.coverage = 0.4;
    auto inputs = testutil::toy_inputs(opt);

    std::size_t events = 0;
    for (auto _ : state) {
        auto journal = scheduler::run_challenge(inputs);
        events = journal.events().size();
        benchmark::DoNotOptimize(journal.digest());
    }
    state.counters["events"] = static_cast<double>(events);
    state.counters["events/s"] = benchmark::Counter(
        static_cast<double>(events) * static_cast<double>(state.iterations()),
        benchmark::Counter::kIsRate);
}

void BM_Replay(benchmark::State& state) {
    testutil::ToyOptions opt;
    opt.samples = static_cast<int>(state.range(0));
    opt.nodes = 4;
    opt.capacity = 25;
    auto inputs = testutil::toy_inputs(opt);
    auto journal = scheduler::run_challenge(inputs);
    const std::string text = journal.to_jsonl();

    for (auto _ : state) {
        std::istringstream in(text);
        auto loaded = journal::RunJournal::from_jsonl(in, "bench");
        benchmark::DoNotOptimize(journal::replay(loaded).done);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(text.size()) * state.iterations());
}

}  // namespace

BENCHMARK(BM_RunChallenge)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Replay)->Arg(500)->Unit(benchmark::kMillisecond);
