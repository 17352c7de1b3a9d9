#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rangeforge/cluster.hpp"
#include "rangeforge/corpus.hpp"
#include "rangeforge/detector.hpp"
#include "rangeforge/journal.hpp"
#include "rangeforge/lifecycle.hpp"
#include "rangeforge/time.hpp"

namespace rangeforge::scheduler {

/// Hard control-plane caps. The hypervisor control plane admits at most 2,000
/// API connections and 600 concurrent tasks before queueing; exceeding either
/// is a harness bug, so the engine queues instead. One control operation
/// (deploy/boot or snapshot revert) holds one task and one connection.
struct Limits {
    int max_api_connections = 2000;
    int max_concurrent_tasks = 600;
    int max_concurrent_vms = 2000;  // 2500 is the documented upper figure
    int max_attempts = 3;

    void validate() const;
};

enum class Phase : std::uint8_t { Deploy, QaPre, Main, QaPost, Teardown };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);
const std::vector<Phase>& default_phase_plan();

struct RunParams {
    Limits limits;
    lifecycle::StageTimings timings;
    cluster::DeployTimings deploy_timings;
    cluster::DeployMode deploy_mode = cluster::DeployMode::FastClone;
    SimTime teardown_duration = seconds(5400);
    std::vector<Phase> phases = default_phase_plan();
    std::size_t qa_subset = 1500;
    double qa_crash_loop_threshold = 0.01;  // incomplete fraction that flags a crash loop
    bool early_exit = true;  // stop a stage at the verdict instead of running the full budget
    std::uint64_t seed = 0;

    void validate() const;
};

/// Everything a run needs, resolved. The journal is a pure function of this.
struct RunInputs {
    RunParams params;
    corpus::SampleSet set;
    std::vector<cluster::PhysicalNodeSpec> topology;
    detector::DetectorModel model;

    // provenance recorded in the journal header
    std::string config_digest;
    std::map<std::string, std::string> input_digests;
};

using EventObserver = std::function<void(const journal::JournalEvent&)>;

/// Drives the full challenge: deploy, QA pre-run, main sweep (every sample
/// reaches Done or Incomplete), completeness audit, teardown. Identical
/// inputs yield a byte-identical journal.
journal::RunJournal run_challenge(const RunInputs& inputs,
                                  const EventObserver& observer = {});

struct QaFailure {
    std::string cls;  // crash_loop | zero_determination | timing_anomaly
    std::string detail;
    std::int64_t count = 0;
};

struct QaReport {
    std::size_t subset_size = 0;
    bool go = false;
    std::vector<QaFailure> failures;
    std::int64_t done = 0;
    std::int64_t incomplete = 0;
    std::int64_t crashes = 0;
    std::int64_t determinations = 0;
    SimTime duration = 0;

    std::string to_json_text() const;
    static QaReport from_json_text(const std::string& text);
};

/// Runs the sweep on a representative stratified subset and classifies
/// failures (crash loops, zero-determination detectors, timing anomalies).
QaReport qa_run(const RunInputs& inputs, std::size_t subset_size);

/// Sample ids with no Done trial in the main phase; empty means the range may
/// be reset.
std::vector<std::string> completeness_check(const journal::RunJournal& journal,
                                            const corpus::SampleSet& set);

/// Recomputes concurrency counters from the journal alone; the independent
/// check that no limit was ever exceeded, not even transiently.
struct LimitAudit {
    int max_tasks = 0;
    int max_connections = 0;
    int max_vms = 0;
    std::map<std::string, int> max_busy_by_node;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

LimitAudit audit_limits(const journal::RunJournal& journal, const Limits& limits,
                        const std::vector<cluster::PhysicalNodeSpec>& topology);

struct PhaseSpan {
    SimTime start = -1;
    SimTime end = -1;
};

std::map<std::string, PhaseSpan> phase_spans(const journal::RunJournal& journal);

/// sample -> sim_time of its completing transition (Done or Incomplete).
std::map<std::string, SimTime> completion_times(const journal::RunJournal& journal,
                                                std::string_view phase);

}  // namespace rangeforge::scheduler
