#include "rangeforge/detector.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rangeforge/error.hpp"

namespace rangeforge::detector {

using corpus::Label;
using corpus::SampleRecord;
using lifecycle::Action;
using lifecycle::Determination;
using lifecycle::Stage;
using lifecycle::StageTimings;
using lifecycle::TrialState;
using nlohmann::json;

namespace {

bool pattern_matches(const std::string& pattern, const std::string& text) {
    static std::mutex mu;
    static std::unordered_map<std::string, std::regex> cache;
    const std::regex* re = nullptr;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(pattern);
        if (it == cache.end()) {
            it = cache.emplace(pattern, std::regex(pattern)).first;
        }
        re = &it->second;
    }
    return std::regex_search(text, *re);
}

void check_prob_table(const std::map<std::string, double>& table, const char* what) {
    for (const auto& [type, p] : table) {
        if (p < 0.0 || p > 1.0) {
            throw ValidationError(std::string(what) + "[" + type + "] out of [0,1]");
        }
    }
}

}  // namespace

double DetectorModel::prob_for(const std::map<std::string, double>& table,
                               const std::string& filetype) const {
    auto it = table.find(filetype);
    if (it != table.end()) return it->second;
    it = table.find("other");
    return it != table.end() ? it->second : 0.0;
}

bool DetectorModel::signature_match(const SampleRecord& sample) const {
    if (sample.label != Label::Malicious || sample.zero_day) return false;
    if (signature_db.count(sample.content_digest) != 0) return true;
    if (signature_coverage <= 0.0) return false;
    return keyed_unit(sample.content_digest, "sigdb/" + name) < signature_coverage;
}

double DetectorModel::crash_prob_for(const std::string& sample_id) const {
    for (const auto& rule : crash_rules) {
        if (pattern_matches(rule.pattern, sample_id)) return rule.prob;
    }
    return 0.0;
}

void DetectorModel::validate(const StageTimings& timings) const {
    if (name.empty()) throw ValidationError("detector model without a name");
    if (signature_coverage < 0.0 || signature_coverage > 1.0) {
        throw ValidationError("signature_coverage out of [0,1]");
    }
    check_prob_table(static_hit_prob, "static_hit_prob");
    check_prob_table(dynamic_hit_prob, "dynamic_hit_prob");
    check_prob_table(false_positive_prob, "false_positive_prob");
    if (dynamic_fp_factor < 0.0) throw ValidationError("dynamic_fp_factor must be >= 0");
    if (egress_rate < 0.0 || egress_rate > 1.0) throw ValidationError("egress_rate out of [0,1]");
    for (const auto& rule : crash_rules) {
        if (rule.prob < 0.0 || rule.prob > 1.0) {
            throw ValidationError("crash rule '" + rule.pattern + "' prob out of [0,1]");
        }
        pattern_matches(rule.pattern, "probe");  // surfaces bad regexes at load time
    }
    for (const auto& [lat, budget, what] :
         {std::tuple{static_latency, timings.static_timeout, "static"},
          std::tuple{dynamic_latency, timings.dynamic_timeout, "dynamic"}}) {
        if (lat.lo < 0 || lat.hi < lat.lo) {
            throw ValidationError(std::string(what) + " latency bounds inverted");
        }
        if (lat.hi > budget) {
            throw ValidationError(std::string(what) +
                                  " latency support exceeds the stage budget");
        }
    }
    if (resources.cpu_ms_lo < 0 || resources.cpu_ms_hi < resources.cpu_ms_lo ||
        resources.mem_mb_lo < 0 || resources.mem_mb_hi < resources.mem_mb_lo) {
        throw ValidationError("resource bounds inverted or negative");
    }
}

namespace {

ResourceModel const& res(const DetectorModel& m) { return m.resources; }

lifecycle::ResourceDraw draw_resources(const DetectorModel& model, Rng& stream) {
    lifecycle::ResourceDraw out;
    out.cpu_ms = stream.uniform_int(res(model).cpu_ms_lo, res(model).cpu_ms_hi);
    out.peak_mem_mb = stream.uniform_int(res(model).mem_mb_lo, res(model).mem_mb_hi);
    return out;
}

}  // namespace

std::optional<Determination> evaluate_static(const DetectorModel& model,
                                             const SampleRecord& sample,
                                             const StageTimings& timings, Rng substream) {
    (void)timings;
    bool hit = false;
    if (model.signature_match(sample)) {
        hit = true;
    } else {
        const double p = sample.label == Label::Malicious
                             ? model.prob_for(model.static_hit_prob, sample.filetype)
                             : model.prob_for(model.false_positive_prob, sample.filetype);
        hit = substream.bernoulli(p);
    }
    if (!hit) return std::nullopt;

    Determination det;
    det.stage = Stage::Static;
    det.t_det = substream.uniform_int(model.static_latency.lo, model.static_latency.hi);
    det.resources = draw_resources(model, substream);
    det.action = Action::Flagged;
    return det;
}

std::optional<Determination> evaluate_dynamic(const DetectorModel& model,
                                              const SampleRecord& sample,
                                              const StageTimings& timings, Rng substream) {
    double p = sample.label == Label::Malicious
                   ? model.prob_for(model.dynamic_hit_prob, sample.filetype)
                   : model.prob_for(model.false_positive_prob, sample.filetype) *
                         model.dynamic_fp_factor;
    if (p > 1.0) p = 1.0;
    if (!substream.bernoulli(p)) return std::nullopt;

    Determination det;
    det.stage = Stage::Dynamic;
    det.t_det = timings.static_timeout +
                substream.uniform_int(model.dynamic_latency.lo, model.dynamic_latency.hi);
    det.resources = draw_resources(model, substream);
    // Blocking, warning, and quarantining all count as a malicious verdict.
    static constexpr Action kActions[] = {Action::Blocked, Action::Warned, Action::Quarantined};
    det.action = kActions[substream.below(3)];
    return det;
}

SimTime planned_phase_len(const TrialPlan& plan, TrialState phase, const StageTimings& timings,
                          bool early_exit) {
    switch (phase) {
        case TrialState::Booting:
            return timings.boot;
        case TrialState::StaticScan:
            if (plan.static_det && early_exit) return plan.static_det->t_det;
            return timings.static_timeout;
        case TrialState::DynamicExec:
            if (!plan.runs_dynamic()) return 0;
            if (plan.dynamic_det && early_exit) {
                return plan.dynamic_det->t_det - timings.static_timeout;
            }
            return timings.dynamic_timeout;
        case TrialState::Collecting:
            return timings.collect;
        case TrialState::Reverting:
            return timings.revert;
        default:
            return 0;
    }
}

TrialPlan plan_trial(const DetectorModel& model, const SampleRecord& sample,
                     const StageTimings& timings, bool early_exit, std::uint64_t run_seed,
                     std::string_view trial_key) {
    const Rng root = Rng(run_seed).substream("trial").substream(trial_key);

    TrialPlan plan;
    plan.static_det = evaluate_static(model, sample, timings, root.substream("static"));
    if (!plan.static_det) {
        plan.dynamic_det = evaluate_dynamic(model, sample, timings, root.substream("dynamic"));
    }

    {
        Rng stream = root.substream("egress");
        const SimTime static_len =
            planned_phase_len(plan, TrialState::StaticScan, timings, early_exit);
        if (static_len > 0 && stream.bernoulli(model.egress_rate)) {
            plan.egress = true;
            plan.egress_offset = stream.uniform_int(0, std::min<SimTime>(1000, static_len) - 1);
        }
    }

    {
        Rng stream = root.substream("crash");
        if (stream.bernoulli(model.crash_prob_for(sample.sample_id))) {
            // Crash somewhere in a phase that actually runs; zero-length
            // phases cannot host a crash.
            std::vector<TrialState> candidates;
            for (TrialState phase : {TrialState::Booting, TrialState::StaticScan,
                                     TrialState::DynamicExec, TrialState::Collecting,
                                     TrialState::Reverting}) {
                if (planned_phase_len(plan, phase, timings, early_exit) > 0) {
                    candidates.push_back(phase);
                }
            }
            if (!candidates.empty()) {
                CrashDraw crash;
                crash.state = candidates[stream.below(candidates.size())];
                crash.offset = stream.uniform_int(
                    0, planned_phase_len(plan, crash.state, timings, early_exit) - 1);
                plan.crash = crash;
            }
        }
    }
    return plan;
}

const BlockedEgress& filter_egress(EgressPolicy& policy, std::string trial_id, SimTime t) {
    policy.log.push_back(BlockedEgress{std::move(trial_id), t});
    return policy.log.back();
}

namespace {

std::map<std::string, double> uniform_table(double p) {
    std::map<std::string, double> table;
    for (const auto& type : corpus::default_filetypes()) table[type] = p;
    return table;
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> kNames = {"signature-heavy", "ml-generalizer",
                                                    "noisy", "crash-all"};
    return kNames;
}

DetectorModel preset(std::string_view name) {
    DetectorModel m;
    m.name = std::string(name);
    if (name == "signature-heavy") {
        m.signature_coverage = 0.55;
        m.static_hit_prob = uniform_table(0.35);
        m.dynamic_hit_prob = uniform_table(0.30);
        m.false_positive_prob = uniform_table(0.02);
        m.egress_rate = 0.01;
        m.crash_rules = {{"13$", 0.5}};
    } else if (name == "ml-generalizer") {
        m.signature_coverage = 0.15;
        m.static_hit_prob = uniform_table(0.55);
        m.dynamic_hit_prob = uniform_table(0.50);
        m.false_positive_prob = uniform_table(0.04);
        m.egress_rate = 0.05;
        m.crash_rules = {{"77$", 0.4}};
    } else if (name == "noisy") {
        m.signature_coverage = 0.30;
        m.static_hit_prob = uniform_table(0.40);
        m.dynamic_hit_prob = uniform_table(0.35);
        m.false_positive_prob = uniform_table(0.18);
        m.egress_rate = 0.10;
        m.crash_rules = {{"9$", 0.25}};
    } else if (name == "crash-all") {
        // QA fixture: every attempt crashes, so every sample exhausts its retries.
        m.signature_coverage = 0.0;
        m.static_hit_prob = uniform_table(0.0);
        m.dynamic_hit_prob = uniform_table(0.0);
        m.false_positive_prob = uniform_table(0.0);
        m.crash_rules = {{"", 1.0}};
    } else {
        throw ValidationError("unknown detector preset: " + std::string(name));
    }
    return m;
}

namespace {

std::map<std::string, double> table_from_json(const json& obj) {
    std::map<std::string, double> table;
    for (auto& [k, v] : obj.items()) table[k] = v.get<double>();
    return table;
}

}  // namespace

DetectorModel model_from_json_text(const std::string& text, const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError(source_name + ": detector model must be a JSON object");
    }
    DetectorModel m;
    try {
        m.name = doc.at("name").get<std::string>();
        for (const auto& d : doc.value("signature_db", json::array())) {
            m.signature_db.insert(d.get<std::string>());
        }
        m.signature_coverage = doc.value("signature_coverage", 0.0);
        m.static_hit_prob = table_from_json(doc.value("static_hit_prob", json::object()));
        m.dynamic_hit_prob = table_from_json(doc.value("dynamic_hit_prob", json::object()));
        m.false_positive_prob =
            table_from_json(doc.value("false_positive_prob", json::object()));
        m.dynamic_fp_factor = doc.value("dynamic_fp_factor", 1.0);
        if (doc.contains("latency_ms")) {
            const auto& lat = doc.at("latency_ms");
            if (lat.contains("static")) {
                m.static_latency = {lat.at("static").at(0).get<SimTime>(),
                                    lat.at("static").at(1).get<SimTime>()};
            }
            if (lat.contains("dynamic")) {
                m.dynamic_latency = {lat.at("dynamic").at(0).get<SimTime>(),
                                     lat.at("dynamic").at(1).get<SimTime>()};
            }
        }
        if (doc.contains("resources")) {
            const auto& r = doc.at("resources");
            m.resources.cpu_ms_lo = r.value("cpu_ms_lo", m.resources.cpu_ms_lo);
            m.resources.cpu_ms_hi = r.value("cpu_ms_hi", m.resources.cpu_ms_hi);
            m.resources.mem_mb_lo = r.value("mem_mb_lo", m.resources.mem_mb_lo);
            m.resources.mem_mb_hi = r.value("mem_mb_hi", m.resources.mem_mb_hi);
        }
        m.egress_rate = doc.value("egress_rate", 0.0);
        for (const auto& rule : doc.value("crash_rules", json::array())) {
            m.crash_rules.push_back(
                {rule.at("pattern").get<std::string>(), rule.at("prob").get<double>()});
        }
    } catch (const json::exception& e) {
        throw ValidationError(source_name + ": " + e.what());
    }
    return m;
}

std::unordered_set<std::string> load_signature_db(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open signature db: " + path);
    std::unordered_set<std::string> digests;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() != '#') digests.insert(line);
    }
    return digests;
}

DetectorModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open detector model: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto model = model_from_json_text(buf.str(), path);

    // signature_db may live in a sibling digest-list file, one digest per line
    json doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_object() && doc.contains("signature_db_path")) {
        namespace fs = std::filesystem;
        fs::path db(doc.at("signature_db_path").get<std::string>());
        if (db.is_relative()) db = fs::path(path).parent_path() / db;
        for (auto& d : load_signature_db(db.string())) model.signature_db.insert(d);
    }
    return model;
}

std::string model_to_json_text(const DetectorModel& m) {
    json doc{{"name", m.name},
             {"signature_coverage", m.signature_coverage},
             {"static_hit_prob", m.static_hit_prob},
             {"dynamic_hit_prob", m.dynamic_hit_prob},
             {"false_positive_prob", m.false_positive_prob},
             {"dynamic_fp_factor", m.dynamic_fp_factor},
             {"latency_ms",
              {{"static", {m.static_latency.lo, m.static_latency.hi}},
               {"dynamic", {m.dynamic_latency.lo, m.dynamic_latency.hi}}}},
             {"resources",
              {{"cpu_ms_lo", m.resources.cpu_ms_lo},
               {"cpu_ms_hi", m.resources.cpu_ms_hi},
               {"mem_mb_lo", m.resources.mem_mb_lo},
               {"mem_mb_hi", m.resources.mem_mb_hi}}},
             {"egress_rate", m.egress_rate}};
    doc["signature_db"] = json::array();
    std::vector<std::string> digests(m.signature_db.begin(), m.signature_db.end());
    std::sort(digests.begin(), digests.end());
    for (auto& d : digests) doc["signature_db"].push_back(d);
    doc["crash_rules"] = json::array();
    for (const auto& rule : m.crash_rules) {
        doc["crash_rules"].push_back({{"pattern", rule.pattern}, {"prob", rule.prob}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace rangeforge::detector
