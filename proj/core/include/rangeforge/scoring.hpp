#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rangeforge/corpus.hpp"
#include "rangeforge/journal.hpp"
#include "rangeforge/time.hpp"

namespace rangeforge::scoring {

/// Constant per-node clock offsets, in milliseconds. An event recorded on
/// node n at apparent time t happened at t - offsets[n].
struct SkewModel {
    std::map<std::string, SimTime> offsets;
};

SkewModel skew_from_json_text(const std::string& text, const std::string& source_name);
SkewModel load_skew(const std::string& path);

/// Undoes per-node clock skew: every timestamp on node n shifts by
/// -offsets[n], events re-sort by (time, seq), and the digest is recomputed.
/// Idempotent at zero offsets; throws on an event whose node is unknown.
journal::RunJournal correct_skew(const journal::RunJournal& journal, const SkewModel& skew);

/// Applies skew (what a collector with drifting node clocks would have
/// recorded). Test/CLI utility; correct_skew(inject_skew(j)) == j.
journal::RunJournal inject_skew(const journal::RunJournal& journal, const SkewModel& skew);

struct TypeCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;
};

/// Confusion tallies over the main sweep of a closed journal. Incomplete
/// samples are excluded from the counts and surfaced separately.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;
    std::int64_t tp_static = 0;
    std::int64_t tp_dynamic = 0;
    std::map<std::string, TypeCounts> by_type;
    std::int64_t zero_day_tp = 0;
    std::int64_t zero_day_fn = 0;
    std::vector<std::string> incomplete;

    // carried along for the cost model
    std::vector<SimTime> tp_det_times;   // per-TP time to determination
    std::int64_t det_cpu_ms = 0;         // cpu over counted determinations

    std::int64_t completed() const { return tp + fp + tn + fn; }
};

ConfusionCounts tally(const journal::RunJournal& journal, const corpus::SampleSet& set);

/// Linear-decomposition operational cost model with a linear time-decay
/// savings term; stands in for the unpublished challenge cost model. Every
/// coefficient is config and the report prints the formula used. Lower is
/// better.
struct CostParams {
    double device_cost = 10000.0;
    double resource_rate = 0.02;        // currency per cpu-second
    double labor_rate = 80.0;           // currency per analyst-hour
    double triage_hours_per_fp = 0.5;
    double fp_incident_cost = 500.0;
    double fn_incident_cost = 2500.0;
    double tp_saving_base = 1000.0;
    double detection_horizon_s = 300.0;  // savings decay to zero at the horizon

    /// Scales the currency-dimension fields by k. The horizon has time
    /// dimension and stays put, which is what makes every total scale by
    /// exactly k and the tool ranking invariant.
    CostParams scaled_currency(double k) const;

    void validate() const;
};

CostParams cost_params_from_json_text(const std::string& text, const std::string& source_name);
std::string cost_params_to_json_text(const CostParams& params);

struct ScoreReport {
    std::string tool;
    ConfusionCounts counts;
    double total = 0.0;
    double device_term = 0.0;
    double resource_term = 0.0;
    double labor_term = 0.0;
    double fp_term = 0.0;
    double fn_term = 0.0;
    double savings_term = 0.0;  // subtracted
    double cpu_seconds = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
    std::string formula;

    std::string to_json_text() const;
    std::string to_table() const;
};

/// total = device + resource_rate * cpu_s + labor_rate * (fp * triage_hours)
///       + fp_cost * fp + fn_cost * fn
///       - sum over TPs of saving_base * max(0, 1 - t_det / horizon).
ScoreReport cost_score(const ConfusionCounts& counts, const journal::RunJournal& journal,
                       const CostParams& params);

}  // namespace rangeforge::scoring
