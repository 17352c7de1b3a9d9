#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "rangeforge/error.hpp"
#include "rangeforge/journal.hpp"
#include "rangeforge/scheduler.hpp"

#include "oracle_scheduler.hpp"
#include "test_util.hpp"

using namespace rangeforge;
using namespace rangeforge::scheduler;
using journal::AdmitPayload;
using journal::CrashPayload;
using journal::PhasePayload;
using journal::TransitionPayload;

namespace {

int admits_at(const journal::RunJournal& j, SimTime t) {
    int n = 0;
    for (const auto& ev : j.events()) {
        if (ev.sim_time == t && std::holds_alternative<AdmitPayload>(ev.payload)) ++n;
    }
    return n;
}

int count_admits(const journal::RunJournal& j, const std::string& phase) {
    int n = 0;
    for (const auto& ev : j.events()) {
        const auto* a = std::get_if<AdmitPayload>(&ev.payload);
        if (a != nullptr && a->phase == phase) ++n;
    }
    return n;
}

testutil::ToyOptions four_tick_options(int samples, int nodes, int capacity) {
    testutil::ToyOptions opt;
    opt.samples = samples;
    opt.nodes = nodes;
    opt.capacity = capacity;
    opt.timings = testutil::toy_timings(1, 1, 1, 1, 0);  // 4 ticks per no-verdict trial
    opt.static_hit = 0.0;
    opt.dynamic_hit = 0.0;
    opt.fp_rate = 0.0;
    return opt;
}

}  // namespace

TEST_CASE("main sweep: 20 samples on 10 slots with 4-tick trials finishes in 8 ticks") {
    auto inputs = testutil::toy_inputs(four_tick_options(20, 2, 5));
    auto j = run_challenge(inputs);

    const auto spans = phase_spans(j);
    CHECK(spans.at("main").end - spans.at("main").start == 8);

    // independent brute-force oracle agrees tick for tick
    auto oracle = testutil::oracle_main_sweep(inputs);
    CHECK(oracle.makespan == 8);
    const auto times = completion_times(j, "main");
    REQUIRE(times.size() == oracle.completion.size());
    for (const auto& [sample, t] : oracle.completion) {
        CHECK(times.at(sample) == t);
    }
}

TEST_CASE("admission: 700 ready against a 600-task limit admits 600 and queues 100") {
    testutil::ToyOptions opt = four_tick_options(700, 8, 100);
    opt.limits = Limits{2000, 600, 2000, 3};
    auto inputs = testutil::toy_inputs(opt);
    auto j = run_challenge(inputs);

    CHECK(admits_at(j, 0) == 600);
    CHECK(count_admits(j, "main") == 700);

    auto audit = audit_limits(j, inputs.params.limits, inputs.topology);
    CHECK(audit.ok());
    CHECK(audit.max_tasks == 600);
}

TEST_CASE("admission: limits of one serialize execution exactly") {
    testutil::ToyOptions opt = four_tick_options(5, 1, 10);
    opt.limits = Limits{1, 1, 1, 3};
    auto inputs = testutil::toy_inputs(opt);
    auto j = run_challenge(inputs);
    const auto spans = phase_spans(j);
    CHECK(spans.at("main").end - spans.at("main").start == 5 * 4);

    auto audit = audit_limits(j, inputs.params.limits, inputs.topology);
    CHECK(audit.ok());
    CHECK(audit.max_vms == 1);
    CHECK(audit.max_tasks == 1);

    auto oracle = testutil::oracle_main_sweep(inputs);
    CHECK(oracle.makespan == 20);
}

TEST_CASE("crashes: a sample that always crashes gets exactly max_attempts, then incomplete") {
    testutil::ToyOptions opt;
    opt.samples = 1;
    opt.crash_prob = 1.0;
    opt.static_hit = 0.0;
    opt.dynamic_hit = 0.0;
    opt.fp_rate = 0.0;
    auto inputs = testutil::toy_inputs(opt);
    REQUIRE(inputs.params.limits.max_attempts == 3);
    auto j = run_challenge(inputs);

    CHECK(count_admits(j, "main") == 3);
    int crashes = 0;
    bool incomplete = false;
    for (const auto& ev : j.events()) {
        if (std::holds_alternative<CrashPayload>(ev.payload)) ++crashes;
        if (const auto* tr = std::get_if<TransitionPayload>(&ev.payload)) {
            if (tr->to == "incomplete") {
                incomplete = true;
                CHECK(tr->attempt == 3);
            }
        }
    }
    CHECK(crashes == 3);
    CHECK(incomplete);
    CHECK(j.trailer().summary.at("incomplete") == 1);
}

TEST_CASE("crashes: crash on attempt one, success on attempt two") {
    // scan seeds for a plan that crashes exactly once, then completes
    bool found = false;
    for (std::uint64_t seed = 1; seed < 60 && !found; ++seed) {
        testutil::ToyOptions opt;
        opt.samples = 1;
        opt.crash_prob = 0.5;
        opt.seed = seed;
        auto inputs = testutil::toy_inputs(opt);
        auto j = run_challenge(inputs);
        int crashes = 0;
        int done_attempt = 0;
        for (const auto& ev : j.events()) {
            if (std::holds_alternative<CrashPayload>(ev.payload)) ++crashes;
            if (const auto* tr = std::get_if<TransitionPayload>(&ev.payload)) {
                if (tr->to == "done") done_attempt = tr->attempt;
            }
        }
        if (crashes == 1 && done_attempt > 0) {
            CHECK(done_attempt == 2);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("crashes: max_attempts of one never retries") {
    testutil::ToyOptions opt;
    opt.samples = 10;
    opt.crash_prob = 0.7;
    opt.limits.max_attempts = 1;
    auto inputs = testutil::toy_inputs(opt);
    auto j = run_challenge(inputs);
    for (const auto& ev : j.events()) {
        if (const auto* a = std::get_if<AdmitPayload>(&ev.payload)) {
            CHECK(a->attempt == 1);
        }
    }
}

TEST_CASE("qa: healthy detector goes; the subset matches the set distribution within one") {
    testutil::ToyOptions opt;
    opt.samples = 40;
    opt.static_hit = 0.6;
    opt.dynamic_hit = 0.5;
    opt.phases = {Phase::QaPre};
    auto inputs = testutil::toy_inputs(opt);
    inputs.params.qa_subset = 20;

    auto report = qa_run(inputs, 20);
    CHECK(report.go);
    CHECK(report.subset_size == 20);
    CHECK(report.done == 20);

    // distribution check via the qa-phase admits of a full run
    auto j = run_challenge(inputs);
    std::map<std::string, const corpus::SampleRecord*> by_id;
    for (const auto& s : inputs.set.samples) by_id[s.sample_id] = &s;
    std::map<std::pair<corpus::Label, std::string>, int> subset_counts;
    std::map<std::pair<corpus::Label, std::string>, int> full_counts;
    for (const auto& ev : j.events()) {
        const auto* a = std::get_if<AdmitPayload>(&ev.payload);
        if (a != nullptr && a->phase == "qa" && a->attempt == 1) {
            const auto* rec = by_id.at(a->sample);
            ++subset_counts[{rec->label, rec->filetype}];
        }
    }
    for (const auto& s : inputs.set.samples) ++full_counts[{s.label, s.filetype}];
    for (const auto& [key, full_n] : full_counts) {
        const double expected = full_n / 2.0;  // 20 of 40, uniform strata
        CHECK(std::abs(subset_counts[key] - expected) <= 1.0 + 1e-9);
    }
}

TEST_CASE("qa: crash-everything detector is a no-go flagged as a crash loop") {
    testutil::ToyOptions opt;
    opt.samples = 12;
    opt.crash_prob = 1.0;
    auto inputs = testutil::toy_inputs(opt);
    auto report = qa_run(inputs, 8);
    CHECK_FALSE(report.go);
    bool crash_loop = false;
    for (const auto& f : report.failures) {
        if (f.cls == "crash_loop") crash_loop = true;
    }
    CHECK(crash_loop);
    CHECK_THROWS_AS(qa_run(inputs, 100), ValidationError);  // subset larger than the set
}

TEST_CASE("completeness: clean runs come back empty; incomplete samples are named") {
    auto inputs = testutil::toy_inputs({});
    auto j = run_challenge(inputs);
    CHECK(completeness_check(j, inputs.set).empty());

    testutil::ToyOptions crashing;
    crashing.samples = 6;
    crashing.crash_prob = 1.0;
    auto inputs2 = testutil::toy_inputs(crashing);
    auto j2 = run_challenge(inputs2);
    auto missing = completeness_check(j2, inputs2.set);
    CHECK(missing.size() == 6);
}

TEST_CASE("completeness: equals an independent scan of the serialized journal") {
    testutil::ToyOptions opt;
    opt.samples = 24;
    opt.crash_prob = 0.5;
    opt.seed = 17;
    auto inputs = testutil::toy_inputs(opt);
    auto j = run_challenge(inputs);

    // brute-force rescan of the raw jsonl text
    std::set<std::string> done_ids;
    std::istringstream in(j.to_jsonl());
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("\"kind\":\"transition\"") == std::string::npos) continue;
        if (line.find("\"to\":\"done\"") == std::string::npos) continue;
        if (line.find("\"phase\":\"main\"") == std::string::npos) continue;
        const auto key = line.find("\"sample\":\"");
        REQUIRE(key != std::string::npos);
        const auto start = key + 10;
        done_ids.insert(line.substr(start, line.find('"', start) - start));
    }
    std::vector<std::string> expected;
    for (const auto& s : inputs.set.samples) {
        if (done_ids.count(s.sample_id) == 0) expected.push_back(s.sample_id);
    }
    CHECK(completeness_check(j, inputs.set) == expected);
}

TEST_CASE("an empty main phase leaves only run start and end markers") {
    testutil::ToyOptions opt;
    opt.samples = 0;
    auto inputs = testutil::toy_inputs(opt);
    REQUIRE(inputs.set.samples.empty());
    auto j = run_challenge(inputs);
    REQUIRE(j.events().size() == 2);
    const auto* first = std::get_if<PhasePayload>(&j.events()[0].payload);
    const auto* last = std::get_if<PhasePayload>(&j.events()[1].payload);
    REQUIRE(first != nullptr);
    REQUIRE(last != nullptr);
    CHECK(first->phase == "run");
    CHECK(first->action == "start");
    CHECK(last->phase == "run");
    CHECK(last->action == "end");
}

TEST_CASE("full phase plan emits ordered markers with configured durations") {
    testutil::ToyOptions opt;
    opt.samples = 8;
    opt.phases = default_phase_plan();
    auto inputs = testutil::toy_inputs(opt);
    inputs.params.qa_subset = 4;
    inputs.params.teardown_duration = 1234;
    auto j = run_challenge(inputs);

    const auto spans = phase_spans(j);
    const auto deploy_plan = cluster::plan_template_distribution(
        cluster::derive_logical_nodes(inputs.topology), inputs.params.deploy_mode,
        inputs.params.deploy_timings);
    CHECK(spans.at("deploy").end - spans.at("deploy").start ==
          deploy_plan.estimated_duration);
    CHECK(spans.at("teardown").end - spans.at("teardown").start == 1234);
    CHECK(spans.at("deploy").end <= spans.at("qa_pre").start);
    CHECK(spans.at("qa_pre").end <= spans.at("main").start);
    CHECK(spans.at("main").end <= spans.at("qa_post").start);
    CHECK(spans.at("qa_post").end <= spans.at("teardown").start);
    CHECK(spans.at("run").start == 0);
    CHECK(spans.at("run").end == spans.at("teardown").end);
}

TEST_CASE("determinism: identical inputs give byte-identical journals") {
    testutil::ToyOptions opt;
    opt.samples = 16;
    opt.crash_prob = 0.3;
    opt.egress_rate = 0.4;
    opt.coverage = 0.3;
    opt.phases = default_phase_plan();
    auto inputs = testutil::toy_inputs(opt);
    auto a = run_challenge(inputs);
    auto b = run_challenge(inputs);
    CHECK(a.digest() == b.digest());
    CHECK(a.to_jsonl() == b.to_jsonl());
}

TEST_CASE("observer: sees every event in journal order") {
    auto inputs = testutil::toy_inputs({});
    std::vector<std::uint64_t> seen;
    auto j = run_challenge(inputs, [&](const journal::JournalEvent& ev) {
        seen.push_back(ev.seq);
    });
    REQUIRE(seen.size() == j.events().size());
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i + 1);
}

TEST_CASE("fuzz: limit audits stay clean over randomized toy runs") {
    Rng rng(2024);
    for (int round = 0; round < 40; ++round) {
        testutil::ToyOptions opt;
        opt.samples = 1 + static_cast<int>(rng.below(24));
        opt.nodes = 1 + static_cast<int>(rng.below(3));
        opt.capacity = 1 + static_cast<int>(rng.below(4));
        opt.limits = Limits{1 + static_cast<int>(rng.below(8)),
                            1 + static_cast<int>(rng.below(8)),
                            1 + static_cast<int>(rng.below(8)),
                            1 + static_cast<int>(rng.below(3))};
        opt.timings = testutil::toy_timings(1 + rng.below(4), 2 + rng.below(5),
                                            1 + rng.below(4), 1 + rng.below(3), rng.below(3));
        opt.static_hit = rng.uniform01() * 0.8;
        opt.dynamic_hit = rng.uniform01() * 0.8;
        opt.fp_rate = rng.uniform01() * 0.3;
        opt.crash_prob = rng.uniform01() * 0.5;
        opt.egress_rate = rng.uniform01();
        opt.seed = rng.next_u64();
        auto inputs = testutil::toy_inputs(opt);
        auto j = run_challenge(inputs);

        CAPTURE(round);
        auto audit = audit_limits(j, inputs.params.limits, inputs.topology);
        for (const auto& v : audit.violations) {
            CAPTURE(v);
        }
        CHECK(audit.ok());

        // conservation: every sample terminal exactly once, attempts capped
        std::map<std::string, int> terminal;
        std::map<std::string, int> attempts;
        for (const auto& ev : j.events()) {
            if (const auto* tr = std::get_if<TransitionPayload>(&ev.payload)) {
                if (tr->phase != "main") continue;
                if (tr->to == "done" || tr->to == "incomplete") ++terminal[tr->sample];
            }
            if (const auto* a = std::get_if<AdmitPayload>(&ev.payload)) {
                if (a->phase == "main" && a->attempt > attempts[a->sample]) {
                    attempts[a->sample] = a->attempt;
                }
            }
        }
        CHECK(terminal.size() == inputs.set.samples.size());
        for (const auto& [sample, n] : terminal) CHECK(n == 1);
        for (const auto& [sample, n] : attempts) {
            CHECK(n <= inputs.params.limits.max_attempts);
        }
    }
}

TEST_CASE("oracle: engine matches the brute-force stepper on mixed toy instances") {
    Rng rng(555);
    for (int round = 0; round < 20; ++round) {
        testutil::ToyOptions opt;
        opt.samples = 1 + static_cast<int>(rng.below(30));
        opt.nodes = 1 + static_cast<int>(rng.below(3));
        opt.capacity = 1 + static_cast<int>(rng.below(4));
        opt.limits = Limits{1 + static_cast<int>(rng.below(6)),
                            1 + static_cast<int>(rng.below(6)),
                            1 + static_cast<int>(rng.below(6)),
                            1 + static_cast<int>(rng.below(3))};
        opt.static_hit = rng.uniform01();
        opt.dynamic_hit = rng.uniform01();
        opt.fp_rate = rng.uniform01() * 0.5;
        opt.crash_prob = rng.uniform01() * 0.6;
        opt.seed = rng.next_u64();
        auto inputs = testutil::toy_inputs(opt);

        CAPTURE(round);
        auto j = run_challenge(inputs);
        auto oracle = testutil::oracle_main_sweep(inputs);
        const auto spans = phase_spans(j);
        CHECK(spans.at("main").end - spans.at("main").start == oracle.makespan);
        const auto times = completion_times(j, "main");
        REQUIRE(times.size() == oracle.completion.size());
        for (const auto& [sample, t] : oracle.completion) {
            CHECK(times.at(sample) == t);
        }
    }
}
