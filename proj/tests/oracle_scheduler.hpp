#pragma once

// Brute-force event-stepping oracle for the main sweep. Deliberately written
// with flat per-trial scans and no priority queue so it shares no scheduling
// machinery with the engine. Tie discipline mirrors the engine's published
// contract: all due state changes at a time point are processed in trial-id
// order, then reverts, then admissions (both FIFO, nodes first-fit).

#include <deque>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rangeforge/cluster.hpp"
#include "rangeforge/detector.hpp"
#include "rangeforge/scheduler.hpp"

namespace testutil {

using namespace rangeforge;

struct OracleResult {
    std::map<std::string, SimTime> completion;  // sample -> Done/Incomplete time
    SimTime makespan = 0;
};

inline OracleResult oracle_main_sweep(const scheduler::RunInputs& inputs) {
    enum class OPhase { Boot, Static, Dynamic, Collect, WaitRevert, Revert };

    struct OTrial {
        std::string trial_id;
        int sample_idx = 0;
        int attempt = 1;
        detector::TrialPlan plan;
        int node = -1;
        OPhase phase = OPhase::Boot;
        SimTime next_at = 0;  // phase end or crash, absolute; -1 while waiting
        bool crash_next = false;
        bool holds_op = false;
    };

    const auto& params = inputs.params;
    const auto& timings = params.timings;
    const auto& samples = inputs.set.samples;
    auto nodes = cluster::derive_logical_nodes(inputs.topology);
    std::vector<int> busy(nodes.size(), 0);

    std::deque<std::pair<int, int>> ready;  // (sample_idx, attempt)
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) ready.emplace_back(i, 1);
    std::deque<std::string> revert_queue;
    std::map<std::string, OTrial> live;  // keyed by trial id

    int vms = 0;
    int ops = 0;
    OracleResult result;
    SimTime now = 0;

    auto phase_state = [](OPhase p) {
        switch (p) {
            case OPhase::Boot: return lifecycle::TrialState::Booting;
            case OPhase::Static: return lifecycle::TrialState::StaticScan;
            case OPhase::Dynamic: return lifecycle::TrialState::DynamicExec;
            case OPhase::Collect: return lifecycle::TrialState::Collecting;
            default: return lifecycle::TrialState::Reverting;
        }
    };

    auto arm = [&](OTrial& t, OPhase phase) {
        t.phase = phase;
        const auto state = phase_state(phase);
        const SimTime len =
            detector::planned_phase_len(t.plan, state, timings, params.early_exit);
        if (t.plan.crash && t.plan.crash->state == state) {
            t.next_at = now + t.plan.crash->offset;
            t.crash_next = true;
        } else {
            t.next_at = now + len;
            t.crash_next = false;
        }
    };

    auto pump = [&]() {
        while (!revert_queue.empty() && ops < params.limits.max_concurrent_tasks &&
               ops < params.limits.max_api_connections) {
            auto it = live.find(revert_queue.front());
            revert_queue.pop_front();
            OTrial& t = it->second;
            ++ops;
            t.holds_op = true;
            arm(t, OPhase::Revert);
        }
        while (!ready.empty()) {
            if (vms >= params.limits.max_concurrent_vms) break;
            if (ops >= params.limits.max_concurrent_tasks ||
                ops >= params.limits.max_api_connections) {
                break;
            }
            int node = -1;
            for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
                if (busy[i] < nodes[i].vm_capacity) {
                    node = i;
                    break;
                }
            }
            if (node < 0) break;

            auto [sample_idx, attempt] = ready.front();
            ready.pop_front();
            OTrial t;
            t.sample_idx = sample_idx;
            t.attempt = attempt;
            t.trial_id =
                "m-" + samples[sample_idx].sample_id + "#" + std::to_string(attempt);
            t.plan = detector::plan_trial(inputs.model, samples[sample_idx], timings,
                                          params.early_exit, params.seed, t.trial_id);
            t.node = node;
            ++busy[node];
            ++vms;
            ++ops;
            t.holds_op = true;
            arm(t, OPhase::Boot);
            live.emplace(t.trial_id, std::move(t));
        }
    };

    auto finish = [&](OTrial& t, bool done) {
        if (t.holds_op) --ops;
        --busy[t.node];
        --vms;
        if (done || t.attempt >= params.limits.max_attempts) {
            result.completion[samples[t.sample_idx].sample_id] = now;
        } else {
            ready.emplace_back(t.sample_idx, t.attempt + 1);
        }
    };

    pump();
    while (result.completion.size() < samples.size()) {
        SimTime t_next = std::numeric_limits<SimTime>::max();
        for (const auto& [id, t] : live) {
            if (t.phase != OPhase::WaitRevert && t.next_at < t_next) t_next = t.next_at;
        }
        now = t_next;

        // all due changes at this instant, smallest trial id first,
        // re-scanning so zero-length phases chain within the instant
        for (;;) {
            OTrial* due = nullptr;
            for (auto& [id, t] : live) {
                if (t.phase == OPhase::WaitRevert || t.next_at != now) continue;
                if (due == nullptr || id < due->trial_id) due = &t;
            }
            if (due == nullptr) break;

            OTrial& t = *due;
            if (t.crash_next) {
                finish(t, false);
                live.erase(t.trial_id);
                continue;
            }
            switch (t.phase) {
                case OPhase::Boot:
                    --ops;
                    t.holds_op = false;
                    arm(t, OPhase::Static);
                    break;
                case OPhase::Static:
                    if (t.plan.static_det) {
                        arm(t, OPhase::Collect);
                    } else {
                        arm(t, OPhase::Dynamic);
                    }
                    break;
                case OPhase::Dynamic:
                    arm(t, OPhase::Collect);
                    break;
                case OPhase::Collect:
                    t.phase = OPhase::WaitRevert;
                    t.next_at = -1;
                    revert_queue.push_back(t.trial_id);
                    break;
                case OPhase::Revert: {
                    finish(t, true);
                    live.erase(t.trial_id);
                    break;
                }
                case OPhase::WaitRevert:
                    break;
            }
        }
        pump();
    }

    for (const auto& [sample, t] : result.completion) {
        if (t > result.makespan) result.makespan = t;
    }
    return result;
}

}  // namespace testutil
