#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rangeforge/corpus.hpp"
#include "rangeforge/lifecycle.hpp"
#include "rangeforge/rng.hpp"
#include "rangeforge/time.hpp"

namespace rangeforge::detector {

/// Uniform latency over [lo, hi] inclusive, in milliseconds. Support must fit
/// inside the corresponding stage budget.
struct LatencyModel {
    SimTime lo = seconds(1);
    SimTime hi = seconds(92);
};

struct ResourceModel {
    std::int64_t cpu_ms_lo = 500;
    std::int64_t cpu_ms_hi = 5000;
    std::int64_t mem_mb_lo = 50;
    std::int64_t mem_mb_hi = 400;
};

/// Crash likelihood for sample_ids matching an ECMAScript regex (search
/// semantics). First matching rule wins.
struct CrashRule {
    std::string pattern;
    double prob = 0.0;
};

/// A synthetic detector under test. The challenge rules keep real tool
/// behavior unpublishable, so tools are parametric models: a signature
/// knowledge base plus per-filetype hit/false-positive probabilities,
/// latency and resource draws, and an egress habit.
struct DetectorModel {
    std::string name;

    /// Explicit known digests plus a coverage fraction: a non-zero-day
    /// malicious digest is "known" when a hash keyed on (model name, digest)
    /// falls below the coverage. Both routes are signature-path detections.
    std::unordered_set<std::string> signature_db;
    double signature_coverage = 0.0;

    std::map<std::string, double> static_hit_prob;      // by filetype
    std::map<std::string, double> dynamic_hit_prob;     // by filetype
    std::map<std::string, double> false_positive_prob;  // by filetype
    double dynamic_fp_factor = 1.0;

    LatencyModel static_latency{seconds(1), seconds(92)};
    LatencyModel dynamic_latency{seconds(1), seconds(60)};
    ResourceModel resources;

    double egress_rate = 0.0;
    std::vector<CrashRule> crash_rules;

    /// Per-filetype lookup falling back to "other", then 0.
    double prob_for(const std::map<std::string, double>& table,
                    const std::string& filetype) const;

    /// Signature knowledge. Zero-day samples never match, by definition.
    bool signature_match(const corpus::SampleRecord& sample) const;

    double crash_prob_for(const std::string& sample_id) const;

    void validate(const lifecycle::StageTimings& timings) const;
};

/// Static-stage evaluation: signature hit fires with probability 1; otherwise
/// malicious draws Bernoulli(static_hit_prob[type]) and benign draws
/// Bernoulli(false_positive_prob[type]). The substream must be keyed by
/// (run seed, trial, stage) so replay sees identical draws.
std::optional<lifecycle::Determination> evaluate_static(const DetectorModel& model,
                                                        const corpus::SampleRecord& sample,
                                                        const lifecycle::StageTimings& timings,
                                                        Rng substream);

/// Dynamic-stage evaluation; only meaningful when the static stage stayed
/// silent. t_det lands in (static_timeout, static_timeout + dynamic_timeout].
std::optional<lifecycle::Determination> evaluate_dynamic(const DetectorModel& model,
                                                         const corpus::SampleRecord& sample,
                                                         const lifecycle::StageTimings& timings,
                                                         Rng substream);

struct CrashDraw {
    lifecycle::TrialState state = lifecycle::TrialState::DynamicExec;
    SimTime offset = 0;  // within that phase, strictly before its end
};

/// Everything stochastic about one trial attempt, resolved up front. A pure
/// function of (model, sample, timings, early_exit, run_seed, trial_key);
/// both the engine and the brute-force scheduling oracle consume it.
struct TrialPlan {
    std::optional<lifecycle::Determination> static_det;
    std::optional<lifecycle::Determination> dynamic_det;
    bool egress = false;
    SimTime egress_offset = 0;  // from presentation, < 1 s
    std::optional<CrashDraw> crash;

    bool runs_dynamic() const { return !static_det.has_value(); }
};

TrialPlan plan_trial(const DetectorModel& model, const corpus::SampleRecord& sample,
                     const lifecycle::StageTimings& timings, bool early_exit,
                     std::uint64_t run_seed, std::string_view trial_key);

/// Phase length of a planned attempt, early-exit aware. Zero for a dynamic
/// phase that is skipped.
SimTime planned_phase_len(const TrialPlan& plan, lifecycle::TrialState phase,
                          const lifecycle::StageTimings& timings, bool early_exit);

/// Boss-node egress policy: block-all, with a log of blocked attempts.
struct BlockedEgress {
    std::string trial_id;
    SimTime sim_time = 0;
};

struct EgressPolicy {
    std::vector<BlockedEgress> log;  // mode is always block-all for challenge runs
};

/// The attempt is never delivered; returns the blocked record just appended.
const BlockedEgress& filter_egress(EgressPolicy& policy, std::string trial_id, SimTime t);

const std::vector<std::string>& preset_names();  // signature-heavy, ml-generalizer, noisy
DetectorModel preset(std::string_view name);

/// One digest per line; '#' lines are comments.
std::unordered_set<std::string> load_signature_db(const std::string& path);

/// Model JSON; an optional signature_db_path field pulls in a digest-list
/// file resolved relative to the model file.
DetectorModel load_model(const std::string& path);
DetectorModel model_from_json_text(const std::string& text, const std::string& source_name);
std::string model_to_json_text(const DetectorModel& model);

}  // namespace rangeforge::detector
