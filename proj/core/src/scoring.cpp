#include "rangeforge/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rangeforge/error.hpp"

namespace rangeforge::scoring {

using corpus::Label;
using corpus::SampleSet;
using journal::JournalEvent;
using journal::RunJournal;
using nlohmann::json;

SkewModel skew_from_json_text(const std::string& text, const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError(source_name + ": skew model must be a JSON object");
    }
    SkewModel skew;
    const json& table = doc.contains("offsets_ms") ? doc.at("offsets_ms") : doc;
    for (auto& [node, off] : table.items()) {
        if (!off.is_number_integer()) {
            throw ValidationError(source_name + ": offset for '" + node +
                                  "' must be integer milliseconds");
        }
        skew.offsets[node] = off.get<SimTime>();
    }
    return skew;
}

SkewModel load_skew(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open skew model: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return skew_from_json_text(buf.str(), path);
}

namespace {

RunJournal shift_journal(const RunJournal& journal, const SkewModel& skew, int sign) {
    if (!journal.closed()) throw Error("skew operations require a closed journal");

    std::vector<JournalEvent> events = journal.events();
    for (auto& ev : events) {
        auto it = skew.offsets.find(ev.node);
        if (it == skew.offsets.end()) {
            throw ValidationError("skew model has no offset for node '" + ev.node + "'");
        }
        ev.sim_time += sign * it->second;
    }
    // Stable key (time, seq): seq survives the shift, so correcting restores
    // the original order byte-for-byte.
    std::stable_sort(events.begin(), events.end(),
                     [](const JournalEvent& a, const JournalEvent& b) {
                         if (a.sim_time != b.sim_time) return a.sim_time < b.sim_time;
                         return a.seq < b.seq;
                     });
    return RunJournal::from_parts(journal.header(), std::move(events),
                                  journal.trailer().summary);
}

}  // namespace

RunJournal correct_skew(const RunJournal& journal, const SkewModel& skew) {
    return shift_journal(journal, skew, -1);
}

RunJournal inject_skew(const RunJournal& journal, const SkewModel& skew) {
    return shift_journal(journal, skew, +1);
}

ConfusionCounts tally(const RunJournal& journal, const SampleSet& set) {
    if (!journal.closed()) throw Error("tally requires a closed journal");

    std::unordered_map<std::string_view, const corpus::SampleRecord*> by_id;
    by_id.reserve(set.samples.size());
    for (const auto& s : set.samples) by_id.emplace(s.sample_id, &s);

    // Determinations keyed by trial id; only the attempt that reached Done
    // counts (a crashed attempt is void, its verdict with it).
    std::unordered_map<std::string, const journal::DeterminationPayload*> det_by_trial;
    struct Outcome {
        const journal::DeterminationPayload* det = nullptr;
        bool done = false;
        bool incomplete = false;
    };
    std::map<std::string, Outcome> outcomes;  // sample id -> final outcome

    for (const auto& ev : journal.events()) {
        if (const auto* det = std::get_if<journal::DeterminationPayload>(&ev.payload)) {
            if (det->phase == "main") det_by_trial[det->trial] = det;
        } else if (const auto* tr = std::get_if<journal::TransitionPayload>(&ev.payload)) {
            if (tr->phase != "main") continue;
            if (tr->to == "done") {
                auto& out = outcomes[tr->sample];
                out.done = true;
                auto it = det_by_trial.find(tr->trial);
                out.det = it == det_by_trial.end() ? nullptr : it->second;
            } else if (tr->to == "incomplete") {
                outcomes[tr->sample].incomplete = true;
            }
        }
    }

    ConfusionCounts counts;
    for (const auto& s : set.samples) {
        auto it = outcomes.find(s.sample_id);
        if (it == outcomes.end() || it->second.incomplete) {
            counts.incomplete.push_back(s.sample_id);
            continue;
        }
        const Outcome& out = it->second;
        auto& tc = counts.by_type[s.filetype];
        if (out.det != nullptr) {
            counts.det_cpu_ms += out.det->cpu_ms;
            if (s.label == Label::Malicious) {
                ++counts.tp;
                ++tc.tp;
                if (out.det->stage == "static") ++counts.tp_static;
                if (out.det->stage == "dynamic") ++counts.tp_dynamic;
                if (s.zero_day) ++counts.zero_day_tp;
                counts.tp_det_times.push_back(out.det->t_det);
            } else {
                ++counts.fp;
                ++tc.fp;
            }
        } else {
            if (s.label == Label::Malicious) {
                ++counts.fn;
                ++tc.fn;
                if (s.zero_day) ++counts.zero_day_fn;
            } else {
                ++counts.tn;
                ++tc.tn;
            }
        }
    }
    return counts;
}

CostParams CostParams::scaled_currency(double k) const {
    CostParams out = *this;
    out.device_cost *= k;
    out.resource_rate *= k;
    out.labor_rate *= k;
    out.fp_incident_cost *= k;
    out.fn_incident_cost *= k;
    out.tp_saving_base *= k;
    return out;
}

void CostParams::validate() const {
    for (double v : {device_cost, resource_rate, labor_rate, triage_hours_per_fp,
                     fp_incident_cost, fn_incident_cost, tp_saving_base,
                     detection_horizon_s}) {
        if (v < 0.0 || !std::isfinite(v)) {
            throw ValidationError("cost parameters must be finite and nonnegative");
        }
    }
}

CostParams cost_params_from_json_text(const std::string& text,
                                      const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError(source_name + ": cost params must be a JSON object");
    }
    CostParams p;
    p.device_cost = doc.value("device_cost", p.device_cost);
    p.resource_rate = doc.value("resource_rate", p.resource_rate);
    p.labor_rate = doc.value("labor_rate", p.labor_rate);
    p.triage_hours_per_fp = doc.value("triage_hours_per_fp", p.triage_hours_per_fp);
    p.fp_incident_cost = doc.value("fp_incident_cost", p.fp_incident_cost);
    p.fn_incident_cost = doc.value("fn_incident_cost", p.fn_incident_cost);
    p.tp_saving_base = doc.value("tp_saving_base", p.tp_saving_base);
    p.detection_horizon_s = doc.value("detection_horizon_s", p.detection_horizon_s);
    p.validate();
    return p;
}

std::string cost_params_to_json_text(const CostParams& p) {
    return json{{"device_cost", p.device_cost},
                {"resource_rate", p.resource_rate},
                {"labor_rate", p.labor_rate},
                {"triage_hours_per_fp", p.triage_hours_per_fp},
                {"fp_incident_cost", p.fp_incident_cost},
                {"fn_incident_cost", p.fn_incident_cost},
                {"tp_saving_base", p.tp_saving_base},
                {"detection_horizon_s", p.detection_horizon_s}}
        .dump(2);
}

ScoreReport cost_score(const ConfusionCounts& counts, const RunJournal& journal,
                       const CostParams& params) {
    params.validate();

    // Cross-check the tally against the journal: counted determinations must
    // equal the verdicts of Done main-phase attempts.
    std::int64_t main_done_dets = 0;
    {
        std::unordered_map<std::string, bool> det_trials;
        for (const auto& ev : journal.events()) {
            if (const auto* det = std::get_if<journal::DeterminationPayload>(&ev.payload)) {
                if (det->phase == "main") det_trials[det->trial] = true;
            } else if (const auto* tr = std::get_if<journal::TransitionPayload>(&ev.payload)) {
                if (tr->phase == "main" && tr->to == "done" && det_trials.count(tr->trial)) {
                    ++main_done_dets;
                }
            }
        }
    }
    if (main_done_dets != counts.tp + counts.fp) {
        throw Error("tally inconsistent with journal: " + std::to_string(main_done_dets) +
                    " counted determinations vs tp+fp=" +
                    std::to_string(counts.tp + counts.fp));
    }

    ScoreReport report;
    report.counts = counts;
    report.cpu_seconds = static_cast<double>(counts.det_cpu_ms) / 1000.0;

    report.device_term = params.device_cost;
    report.resource_term = params.resource_rate * report.cpu_seconds;
    report.labor_term =
        params.labor_rate * (static_cast<double>(counts.fp) * params.triage_hours_per_fp);
    report.fp_term = params.fp_incident_cost * static_cast<double>(counts.fp);
    report.fn_term = params.fn_incident_cost * static_cast<double>(counts.fn);

    double savings = 0.0;
    for (SimTime t_det : counts.tp_det_times) {
        const double frac = params.detection_horizon_s <= 0.0
                                ? 1.0
                                : to_seconds(t_det) / params.detection_horizon_s;
        savings += params.tp_saving_base * std::max(0.0, 1.0 - frac);
    }
    report.savings_term = savings;

    report.total = report.device_term + report.resource_term + report.labor_term +
                   report.fp_term + report.fn_term - report.savings_term;

    const double p = static_cast<double>(counts.tp + counts.fn);
    const double n = static_cast<double>(counts.fp + counts.tn);
    report.tpr = p > 0 ? static_cast<double>(counts.tp) / p : 0.0;
    report.fpr = n > 0 ? static_cast<double>(counts.fp) / n : 0.0;
    const double flagged = static_cast<double>(counts.tp + counts.fp);
    report.precision = flagged > 0 ? static_cast<double>(counts.tp) / flagged : 0.0;

    report.formula =
        "total = device_cost + resource_rate*cpu_s + labor_rate*(fp*triage_hours) + "
        "fp_incident_cost*fp + fn_incident_cost*fn - "
        "sum_tp[tp_saving_base*max(0, 1 - t_det/detection_horizon_s)]";
    return report;
}

std::string ScoreReport::to_json_text() const {
    json by_type = json::object();
    for (const auto& [type, tc] : counts.by_type) {
        by_type[type] = {{"tp", tc.tp}, {"fp", tc.fp}, {"tn", tc.tn}, {"fn", tc.fn}};
    }
    json doc{
        {"tool", tool},
        {"total", total},
        {"terms",
         {{"device", device_term},
          {"resource", resource_term},
          {"labor", labor_term},
          {"fp_incidents", fp_term},
          {"fn_incidents", fn_term},
          {"tp_savings", savings_term}}},
        {"counts",
         {{"tp", counts.tp},
          {"fp", counts.fp},
          {"tn", counts.tn},
          {"fn", counts.fn},
          {"tp_static", counts.tp_static},
          {"tp_dynamic", counts.tp_dynamic},
          {"incomplete", counts.incomplete.size()}}},
        {"zero_day", {{"tp", counts.zero_day_tp}, {"fn", counts.zero_day_fn}}},
        {"by_type", by_type},
        {"rates", {{"tpr", tpr}, {"fpr", fpr}, {"precision", precision}}},
        {"cpu_seconds", cpu_seconds},
        {"formula", formula}};
    return doc.dump(2);
}

std::string ScoreReport::to_table() const {
    std::ostringstream out;
    char line[160];
    out << "tool: " << (tool.empty() ? "(unnamed)" : tool) << "\n";
    std::snprintf(line, sizeof(line), "  %-12s %10lld  %-12s %10lld\n", "tp",
                  static_cast<long long>(counts.tp), "fp", static_cast<long long>(counts.fp));
    out << line;
    std::snprintf(line, sizeof(line), "  %-12s %10lld  %-12s %10lld\n", "tn",
                  static_cast<long long>(counts.tn), "fn", static_cast<long long>(counts.fn));
    out << line;
    std::snprintf(line, sizeof(line), "  %-12s %10.4f  %-12s %10.4f\n", "tpr", tpr, "fpr", fpr);
    out << line;
    std::snprintf(line, sizeof(line), "  %-12s %7lld/%lld\n", "zero-day tp/fn",
                  static_cast<long long>(counts.zero_day_tp),
                  static_cast<long long>(counts.zero_day_fn));
    out << line;
    std::snprintf(line, sizeof(line), "  %-12s %10zu\n", "incomplete", counts.incomplete.size());
    out << line;
    std::snprintf(line, sizeof(line),
                  "  terms: device %.2f resource %.2f labor %.2f fp %.2f fn %.2f savings "
                  "-%.2f\n",
                  device_term, resource_term, labor_term, fp_term, fn_term, savings_term);
    out << line;
    std::snprintf(line, sizeof(line), "  total: %.2f (lower is better)\n", total);
    out << line;
    return out.str();
}

}  // namespace rangeforge::scoring
