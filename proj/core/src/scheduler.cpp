#include "rangeforge/scheduler.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rangeforge/error.hpp"

namespace rangeforge::scheduler {

using corpus::Label;
using corpus::SampleRecord;
using corpus::SampleSet;
using detector::TrialPlan;
using journal::JournalEvent;
using journal::RunJournal;
using lifecycle::Trial;
using lifecycle::TrialState;
using nlohmann::json;

void Limits::validate() const {
    for (int v : {max_api_connections, max_concurrent_tasks, max_concurrent_vms, max_attempts}) {
        if (v < 1) throw ValidationError("all limits must be >= 1");
    }
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Deploy: return "deploy";
        case Phase::QaPre: return "qa_pre";
        case Phase::Main: return "main";
        case Phase::QaPost: return "qa_post";
        case Phase::Teardown: return "teardown";
    }
    return "?";
}

Phase phase_from_string(std::string_view text) {
    for (Phase p : {Phase::Deploy, Phase::QaPre, Phase::Main, Phase::QaPost, Phase::Teardown}) {
        if (to_string(p) == text) return p;
    }
    throw ValidationError("unknown phase: " + std::string(text));
}

const std::vector<Phase>& default_phase_plan() {
    static const std::vector<Phase> kPlan = {Phase::Deploy, Phase::QaPre, Phase::Main,
                                             Phase::QaPost, Phase::Teardown};
    return kPlan;
}

void RunParams::validate() const {
    limits.validate();
    timings.validate();
    deploy_timings.validate();
    if (teardown_duration < 0) throw ValidationError("teardown_duration must be nonnegative");
    if (qa_crash_loop_threshold < 0.0 || qa_crash_loop_threshold > 1.0) {
        throw ValidationError("qa_crash_loop_threshold out of [0,1]");
    }
    std::unordered_set<int> seen;
    for (Phase p : phases) {
        if (!seen.insert(static_cast<int>(p)).second) {
            throw ValidationError("phase plan repeats phase '" + std::string(to_string(p)) + "'");
        }
    }
}

std::string QaReport::to_json_text() const {
    json doc{{"subset_size", subset_size}, {"go", go},
             {"done", done},             {"incomplete", incomplete},
             {"crashes", crashes},       {"determinations", determinations},
             {"duration", duration}};
    doc["failures"] = json::array();
    for (const auto& f : failures) {
        doc["failures"].push_back({{"class", f.cls}, {"detail", f.detail}, {"count", f.count}});
    }
    return doc.dump();
}

QaReport QaReport::from_json_text(const std::string& text) {
    json doc = json::parse(text);
    QaReport r;
    r.subset_size = doc.at("subset_size").get<std::size_t>();
    r.go = doc.at("go").get<bool>();
    r.done = doc.at("done").get<std::int64_t>();
    r.incomplete = doc.at("incomplete").get<std::int64_t>();
    r.crashes = doc.at("crashes").get<std::int64_t>();
    r.determinations = doc.at("determinations").get<std::int64_t>();
    r.duration = doc.at("duration").get<SimTime>();
    for (const auto& f : doc.at("failures")) {
        r.failures.push_back({f.at("class").get<std::string>(),
                              f.at("detail").get<std::string>(),
                              f.at("count").get<std::int64_t>()});
    }
    return r;
}

namespace {

/// Discrete-event engine for one challenge run. Single logical thread over a
/// time-ordered queue; all tie-breaks are content-addressed
/// (time, rank, trial key, event id), never pointer or hash order, which is
/// what makes journals byte-identical across runs.
class Engine {
public:
    Engine(const RunInputs& inputs, const EventObserver& observer)
        : inputs_(inputs), observer_(observer) {
        inputs_.params.validate();
        inputs_.model.validate(inputs_.params.timings);
        nodes_ = cluster::derive_logical_nodes(inputs_.topology);

        journal::Header header;
        header.seed = inputs_.params.seed;
        header.config_digest = inputs_.config_digest;
        header.inputs = inputs_.input_digests;
        journal_ = RunJournal(std::move(header));
    }

    RunJournal run() {
        emit_phase("run", "start");
        start_next_phase();
        pump_all();

        while (!queue_.empty() && !finished_) {
            const SimTime t = queue_.top().t;
            clock_ = t;
            while (!queue_.empty() && queue_.top().t == t) {
                const Ev ev = queue_.top();
                queue_.pop();
                dispatch(ev);
            }
            pump_all();
        }

        clock_ = finished_at_;
        emit_phase("run", "end");
        journal_.close({{"done", main_done_},
                        {"incomplete", main_incomplete_},
                        {"final_sim_time", clock_}});
        return std::move(journal_);
    }

    QaReport last_qa_report() const { return qa_report_; }

private:
    // Tie ranks at equal sim time: record-only events first, lifecycle steps
    // second, phase control last. Within a rank, trial key then event id.
    enum class What : int {
        Egress = 0,
        DetRecord = 1,
        BootDone = 10,
        StaticEnd = 11,
        DynamicEnd = 12,
        CollectDone = 13,
        RevertDone = 14,
        Crash = 15,
        PhaseElapsed = 20,
    };

    static int rank_of(What w) {
        if (w == What::Egress || w == What::DetRecord) return 0;
        if (w == What::PhaseElapsed) return 2;
        return 1;
    }

    struct Ev {
        SimTime t = 0;
        int rank = 0;
        std::string key;
        What what = What::BootDone;
    };

    struct EvAfter {
        bool operator()(const Ev& a, const Ev& b) const {
            if (a.t != b.t) return a.t > b.t;
            if (a.rank != b.rank) return a.rank > b.rank;
            if (a.key != b.key) return a.key > b.key;
            return static_cast<int>(a.what) > static_cast<int>(b.what);
        }
    };

    struct PendingTrial {
        int sample_idx = 0;
        int attempt = 1;
    };

    struct Active {
        Trial trial;
        TrialPlan plan;
        int node_idx = -1;
        int sample_idx = -1;
        bool holds_op = false;  // one task + one API connection (boot or revert)
    };

    // --- journal plumbing -------------------------------------------------

    void emit(journal::Payload payload, std::string node) {
        JournalEvent ev;
        ev.seq = journal_.next_seq();
        ev.sim_time = clock_;
        ev.node = std::move(node);
        ev.payload = std::move(payload);
        if (observer_) observer_(ev);
        journal_.append(std::move(ev));
    }

    void emit_phase(std::string phase, std::string action, SimTime duration = -1) {
        emit(journal::PhasePayload{std::move(phase), std::move(action), duration},
             std::string(journal::kBossNode));
    }

    // --- phase driver -----------------------------------------------------

    void start_next_phase() {
        while (phase_idx_ < inputs_.params.phases.size()) {
            const Phase phase = inputs_.params.phases[phase_idx_++];
            switch (phase) {
                case Phase::Deploy: {
                    const auto plan = cluster::plan_template_distribution(
                        nodes_, inputs_.params.deploy_mode, inputs_.params.deploy_timings);
                    emit_phase("deploy", "start", plan.estimated_duration);
                    emit(journal::AuditPayload{
                             "deploy_plan",
                             json{{"mode", std::string(cluster::to_string(plan.mode))},
                                  {"nodes", nodes_.size()},
                                  {"duration", plan.estimated_duration}}
                                 .dump()},
                         std::string(journal::kBossNode));
                    schedule(clock_ + plan.estimated_duration, "deploy", What::PhaseElapsed);
                    return;
                }
                case Phase::QaPre: {
                    auto subset = build_qa_subset();
                    if (subset.samples.empty()) continue;
                    emit_phase("qa_pre", "start");
                    begin_sweep("qa", std::move(subset.samples));
                    return;
                }
                case Phase::Main: {
                    if (inputs_.set.samples.empty()) continue;
                    emit_phase("main", "start");
                    begin_sweep("main", inputs_.set.samples);
                    return;
                }
                case Phase::QaPost: {
                    emit_phase("qa_post", "start");
                    json detail;
                    detail["incomplete"] = json::array();
                    for (const auto& s : inputs_.set.samples) {
                        auto it = main_completion_.find(s.sample_id);
                        if (it == main_completion_.end() || it->second != TrialState::Done) {
                            detail["incomplete"].push_back(s.sample_id);
                        }
                    }
                    emit(journal::AuditPayload{"completeness", detail.dump()},
                         std::string(journal::kBossNode));
                    emit_phase("qa_post", "end");
                    continue;
                }
                case Phase::Teardown: {
                    emit_phase("teardown", "start", inputs_.params.teardown_duration);
                    schedule(clock_ + inputs_.params.teardown_duration, "teardown",
                             What::PhaseElapsed);
                    return;
                }
            }
        }
        finished_ = true;
        finished_at_ = clock_;
    }

    SampleSet build_qa_subset() const {
        const std::size_t n = std::min(inputs_.params.qa_subset, inputs_.set.samples.size());
        if (n == 0) return SampleSet{};
        if (n == inputs_.set.samples.size()) {
            SampleSet all = inputs_.set;
            return all;
        }
        corpus::CorpusManifest view;
        view.records = inputs_.set.samples;
        const double fraction = static_cast<double>(inputs_.set.count_label(Label::Benign)) /
                                static_cast<double>(inputs_.set.samples.size());
        std::uint64_t qa_seed = inputs_.params.seed ^ fnv1a64("qa_subset");
        return corpus::stratified_sample(view, n, fraction, std::nullopt,
                                         splitmix64(qa_seed));
    }

    void begin_sweep(std::string tag, std::vector<SampleRecord> samples) {
        sweep_tag_ = std::move(tag);
        sweep_samples_ = std::move(samples);
        sweep_started_at_ = clock_;
        sweep_completed_ = 0;
        sweep_done_ = 0;
        sweep_incomplete_ = 0;
        sweep_crashes_ = 0;
        sweep_determinations_ = 0;
        sweep_anomalies_ = 0;
        ready_.clear();
        revert_wait_.clear();
        for (int i = 0; i < static_cast<int>(sweep_samples_.size()); ++i) {
            ready_.push_back({i, 1});
        }
    }

    bool sweep_active() const { return !sweep_tag_.empty(); }

    void end_sweep() {
        if (sweep_tag_ == "qa") {
            qa_report_ = make_qa_report();
            emit(journal::QaPayload{qa_report_.to_json_text()},
                 std::string(journal::kBossNode));
            emit_phase("qa_pre", "end");
        } else {
            main_done_ = sweep_done_;
            main_incomplete_ = sweep_incomplete_;
            emit_phase("main", "end");
        }
        sweep_tag_.clear();
        sweep_samples_.clear();
        start_next_phase();
    }

    QaReport make_qa_report() const {
        QaReport r;
        r.subset_size = sweep_samples_.size();
        r.done = sweep_done_;
        r.incomplete = sweep_incomplete_;
        r.crashes = sweep_crashes_;
        r.determinations = sweep_determinations_;
        r.duration = clock_ - sweep_started_at_;

        const double incomplete_frac =
            sweep_samples_.empty() ? 0.0
                                   : static_cast<double>(sweep_incomplete_) /
                                         static_cast<double>(sweep_samples_.size());
        if (incomplete_frac > inputs_.params.qa_crash_loop_threshold) {
            r.failures.push_back({"crash_loop",
                                  "incomplete fraction " + std::to_string(incomplete_frac),
                                  sweep_incomplete_});
        }
        const bool any_malicious =
            std::any_of(sweep_samples_.begin(), sweep_samples_.end(),
                        [](const SampleRecord& s) { return s.label == Label::Malicious; });
        if (sweep_determinations_ == 0 && any_malicious) {
            r.failures.push_back(
                {"zero_determination", "no determinations over the QA subset", 0});
        }
        if (sweep_anomalies_ > 0) {
            r.failures.push_back(
                {"timing_anomaly", "determinations outside stage budgets", sweep_anomalies_});
        }
        r.go = r.failures.empty();
        return r;
    }

    // --- event machinery ----------------------------------------------------

    void schedule(SimTime t, std::string key, What what) {
        queue_.push(Ev{t, rank_of(what), std::move(key), what});
    }

    void dispatch(const Ev& ev) {
        if (ev.what == What::PhaseElapsed) {
            emit_phase(ev.key, "end");
            start_next_phase();
            return;
        }
        auto it = active_.find(ev.key);
        if (it == active_.end()) return;  // stale: the trial crashed under this event
        Active& a = it->second;

        switch (ev.what) {
            case What::Egress: {
                if (a.trial.state != TrialState::StaticScan) return;
                detector::filter_egress(egress_policy_, a.trial.trial_id, clock_);
                emit(journal::EgressBlockedPayload{sweep_tag_, a.trial.trial_id,
                                                   a.trial.sample_id, a.trial.attempt},
                     a.trial.node);
                return;
            }
            case What::DetRecord: {
                const auto& det = a.trial.state == TrialState::StaticScan
                                      ? a.plan.static_det
                                      : a.plan.dynamic_det;
                if (!det) return;
                ++sweep_determinations_;
                const auto& tm = inputs_.params.timings;
                const SimTime budget = det->stage == lifecycle::Stage::Static
                                           ? tm.static_timeout
                                           : tm.static_timeout + tm.dynamic_timeout;
                if (det->t_det < 0 || det->t_det > budget) ++sweep_anomalies_;
                emit(journal::DeterminationPayload{
                         sweep_tag_, a.trial.trial_id, a.trial.sample_id, a.trial.attempt,
                         std::string(lifecycle::to_string(det->stage)), det->t_det,
                         det->resources.cpu_ms, det->resources.peak_mem_mb,
                         std::string(lifecycle::to_string(det->action))},
                     a.trial.node);
                return;
            }
            case What::BootDone: {
                step(a, lifecycle::Event{lifecycle::Event::Kind::BootComplete, {}});
                release_op(a);
                enter_phase(a, TrialState::StaticScan);
                return;
            }
            case What::StaticEnd: {
                if (a.plan.static_det) {
                    step(a, lifecycle::Event{lifecycle::Event::Kind::Verdict, a.plan.static_det});
                    enter_phase(a, TrialState::Collecting);
                } else {
                    step(a, lifecycle::Event{lifecycle::Event::Kind::StageTimeout, {}});
                    enter_phase(a, TrialState::DynamicExec);
                }
                return;
            }
            case What::DynamicEnd: {
                if (a.plan.dynamic_det) {
                    step(a, lifecycle::Event{lifecycle::Event::Kind::Verdict, a.plan.dynamic_det});
                } else {
                    step(a, lifecycle::Event{lifecycle::Event::Kind::StageTimeout, {}});
                }
                enter_phase(a, TrialState::Collecting);
                return;
            }
            case What::CollectDone: {
                // Collecting -> Reverting needs a control-plane slot; queue for it.
                revert_wait_.push_back(ev.key);
                return;
            }
            case What::RevertDone: {
                step(a, lifecycle::Event{lifecycle::Event::Kind::RevertComplete, {}});
                release_op(a);
                nodes_[a.node_idx].release();
                --active_vms_;
                complete(a.sample_idx, TrialState::Done);
                active_.erase(it);
                return;
            }
            case What::Crash: {
                ++sweep_crashes_;
                emit(journal::CrashPayload{sweep_tag_, a.trial.trial_id, a.trial.sample_id,
                                           a.trial.attempt,
                                           std::string(lifecycle::to_string(a.trial.state))},
                     a.trial.node);
                step(a, lifecycle::Event{lifecycle::Event::Kind::Crash, {}});
                release_op(a);
                nodes_[a.node_idx].release();
                --active_vms_;
                if (a.trial.attempt < inputs_.params.limits.max_attempts) {
                    ready_.push_back({a.sample_idx, a.trial.attempt + 1});
                } else {
                    Trial incomplete =
                        lifecycle::advance(a.trial, {lifecycle::Event::Kind::GiveUp, {}},
                                           inputs_.params.timings, clock_);
                    emit(journal::TransitionPayload{
                             sweep_tag_, a.trial.trial_id, a.trial.sample_id, a.trial.attempt,
                             std::string(lifecycle::to_string(TrialState::Crashed)),
                             std::string(lifecycle::to_string(TrialState::Incomplete))},
                         a.trial.node);
                    complete(a.sample_idx, incomplete.state);
                }
                active_.erase(it);
                return;
            }
            default:
                throw Error("unhandled engine event");
        }
    }

    /// Applies a lifecycle event and journals the transition.
    void step(Active& a, const lifecycle::Event& event) {
        const TrialState from = a.trial.state;
        a.trial = lifecycle::advance(a.trial, event, inputs_.params.timings, clock_);
        emit(journal::TransitionPayload{sweep_tag_, a.trial.trial_id, a.trial.sample_id,
                                        a.trial.attempt,
                                        std::string(lifecycle::to_string(from)),
                                        std::string(lifecycle::to_string(a.trial.state))},
             a.trial.node);
    }

    /// Schedules the events of the phase the trial just entered. A planned
    /// crash inside the phase replaces the phase-end event outright (its
    /// offset is always before the planned end).
    void enter_phase(Active& a, TrialState phase) {
        const auto& tm = inputs_.params.timings;
        const bool early = inputs_.params.early_exit;
        const SimTime len = detector::planned_phase_len(a.plan, phase, tm, early);
        const bool crash_here = a.plan.crash && a.plan.crash->state == phase;
        const SimTime start = clock_;

        if (crash_here) {
            schedule(start + a.plan.crash->offset, a.trial.trial_id, What::Crash);
        } else {
            What end = What::BootDone;
            switch (phase) {
                case TrialState::Booting: end = What::BootDone; break;
                case TrialState::StaticScan: end = What::StaticEnd; break;
                case TrialState::DynamicExec: end = What::DynamicEnd; break;
                case TrialState::Collecting: end = What::CollectDone; break;
                case TrialState::Reverting: end = What::RevertDone; break;
                default: throw Error("enter_phase on a terminal state");
            }
            schedule(start + len, a.trial.trial_id, end);
        }

        if (phase == TrialState::StaticScan) {
            const SimTime crash_off = crash_here ? a.plan.crash->offset : -1;
            if (a.plan.egress && !(crash_here && crash_off < a.plan.egress_offset)) {
                schedule(start + a.plan.egress_offset, a.trial.trial_id, What::Egress);
            }
            if (a.plan.static_det &&
                !(crash_here && crash_off < a.plan.static_det->t_det)) {
                schedule(start + a.plan.static_det->t_det, a.trial.trial_id, What::DetRecord);
            }
        } else if (phase == TrialState::DynamicExec && a.plan.dynamic_det) {
            const SimTime det_off = a.plan.dynamic_det->t_det - tm.static_timeout;
            if (!(crash_here && a.plan.crash->offset < det_off)) {
                schedule(start + det_off, a.trial.trial_id, What::DetRecord);
            }
        }
    }

    void release_op(Active& a) {
        if (!a.holds_op) return;
        a.holds_op = false;
        --tasks_;
        --connections_;
    }

    void acquire_op(Active& a) {
        a.holds_op = true;
        ++tasks_;
        ++connections_;
    }

    void complete(int sample_idx, TrialState terminal) {
        const auto& sample = sweep_samples_[static_cast<std::size_t>(sample_idx)];
        if (sweep_tag_ == "main") main_completion_[sample.sample_id] = terminal;
        ++sweep_completed_;
        if (terminal == TrialState::Done) {
            ++sweep_done_;
        } else {
            ++sweep_incomplete_;
        }
    }

    // --- backpressure pumps -------------------------------------------------

    bool op_headroom() const {
        return tasks_ < inputs_.params.limits.max_concurrent_tasks &&
               connections_ < inputs_.params.limits.max_api_connections;
    }

    void pump_reverts() {
        while (!revert_wait_.empty() && op_headroom()) {
            const std::string id = revert_wait_.front();
            revert_wait_.pop_front();
            auto it = active_.find(id);
            if (it == active_.end()) continue;
            Active& a = it->second;
            acquire_op(a);
            step(a, lifecycle::Event{lifecycle::Event::Kind::CollectComplete, {}});
            enter_phase(a, TrialState::Reverting);
        }
    }

    void pump_admissions() {
        if (!sweep_active()) return;
        while (!ready_.empty()) {
            if (active_vms_ >= inputs_.params.limits.max_concurrent_vms) return;
            if (!op_headroom()) return;
            int node_idx = -1;
            for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
                if (nodes_[i].busy_slots < nodes_[i].vm_capacity) {
                    node_idx = i;
                    break;
                }
            }
            if (node_idx < 0) return;

            const PendingTrial next = ready_.front();
            ready_.pop_front();
            admit(next, node_idx);
        }
    }

    void admit(const PendingTrial& pending, int node_idx) {
        const auto& sample = sweep_samples_[static_cast<std::size_t>(pending.sample_idx)];
        Active a;
        a.sample_idx = pending.sample_idx;
        a.node_idx = node_idx;
        a.trial.trial_id = (sweep_tag_ == "qa" ? "q-" : "m-") + sample.sample_id + "#" +
                           std::to_string(pending.attempt);
        a.trial.sample_id = sample.sample_id;
        a.trial.node = nodes_[node_idx].logical_id;
        a.trial.attempt = pending.attempt;
        a.trial.started_at = clock_;
        a.plan = detector::plan_trial(inputs_.model, sample, inputs_.params.timings,
                                      inputs_.params.early_exit, inputs_.params.seed,
                                      a.trial.trial_id);

        if (!nodes_[node_idx].try_acquire()) throw Error("admit on a full node");
        ++active_vms_;
        acquire_op(a);

        emit(journal::AdmitPayload{sweep_tag_, a.trial.trial_id, a.trial.sample_id,
                                   a.trial.attempt},
             a.trial.node);
        step(a, lifecycle::Event{lifecycle::Event::Kind::PowerOn, {}});

        const std::string id = a.trial.trial_id;
        auto [it, inserted] = active_.emplace(id, std::move(a));
        if (!inserted) throw Error("duplicate active trial " + id);
        enter_phase(it->second, TrialState::Booting);
    }

    void pump_all() {
        for (;;) {
            pump_reverts();
            pump_admissions();
            if (sweep_active() &&
                sweep_completed_ == static_cast<std::int64_t>(sweep_samples_.size())) {
                end_sweep();
                continue;
            }
            break;
        }
        assert_work_conserving();
    }

    void assert_work_conserving() {
        if (!sweep_active() || ready_.empty()) return;
        const bool node_free = std::any_of(nodes_.begin(), nodes_.end(), [](const auto& n) {
            return n.busy_slots < n.vm_capacity;
        });
        if (node_free && active_vms_ < inputs_.params.limits.max_concurrent_vms &&
            op_headroom()) {
            throw Error("scheduler idled with admissible work at t=" + std::to_string(clock_));
        }
    }

    // --- state ----------------------------------------------------------------

    RunInputs inputs_;
    EventObserver observer_;
    cluster::Topology nodes_;
    RunJournal journal_;

    std::priority_queue<Ev, std::vector<Ev>, EvAfter> queue_;
    SimTime clock_ = 0;

    std::size_t phase_idx_ = 0;
    bool finished_ = false;
    SimTime finished_at_ = 0;

    std::string sweep_tag_;  // "qa" | "main"; empty when no sweep is active
    std::vector<SampleRecord> sweep_samples_;
    SimTime sweep_started_at_ = 0;
    std::int64_t sweep_completed_ = 0;
    std::int64_t sweep_done_ = 0;
    std::int64_t sweep_incomplete_ = 0;
    std::int64_t sweep_crashes_ = 0;
    std::int64_t sweep_determinations_ = 0;
    std::int64_t sweep_anomalies_ = 0;

    std::deque<PendingTrial> ready_;
    std::deque<std::string> revert_wait_;
    std::unordered_map<std::string, Active> active_;

    int active_vms_ = 0;
    int tasks_ = 0;
    int connections_ = 0;

    detector::EgressPolicy egress_policy_;

    std::map<std::string, TrialState> main_completion_;
    std::int64_t main_done_ = 0;
    std::int64_t main_incomplete_ = 0;

    QaReport qa_report_;
};

}  // namespace

RunJournal run_challenge(const RunInputs& inputs, const EventObserver& observer) {
    Engine engine(inputs, observer);
    return engine.run();
}

QaReport qa_run(const RunInputs& inputs, std::size_t subset_size) {
    if (subset_size > inputs.set.samples.size()) {
        throw ValidationError("qa subset (" + std::to_string(subset_size) +
                              ") exceeds the sample set (" +
                              std::to_string(inputs.set.samples.size()) + ")");
    }
    RunInputs qa_inputs = inputs;
    qa_inputs.params.phases = {Phase::QaPre};
    qa_inputs.params.qa_subset = subset_size;
    Engine engine(qa_inputs, {});
    engine.run();
    return engine.last_qa_report();
}

std::vector<std::string> completeness_check(const RunJournal& journal, const SampleSet& set) {
    if (!journal.closed()) throw Error("completeness check requires a closed journal");
    std::unordered_set<std::string_view> done;
    for (const auto& ev : journal.events()) {
        const auto* tr = std::get_if<journal::TransitionPayload>(&ev.payload);
        if (tr != nullptr && tr->phase == "main" && tr->to == "done") {
            done.insert(tr->sample);
        }
    }
    std::vector<std::string> missing;
    for (const auto& s : set.samples) {
        if (done.count(s.sample_id) == 0) missing.push_back(s.sample_id);
    }
    return missing;
}

LimitAudit audit_limits(const RunJournal& journal, const Limits& limits,
                        const std::vector<cluster::PhysicalNodeSpec>& topology) {
    LimitAudit audit;
    std::map<std::string, int> capacity;
    for (const auto& node : cluster::derive_logical_nodes(topology)) {
        capacity[node.logical_id] = node.vm_capacity;
    }

    int tasks = 0;
    int connections = 0;
    int vms = 0;
    std::map<std::string, int> busy;

    auto note = [&audit](const std::string& what, std::uint64_t seq) {
        audit.violations.push_back(what + " at seq " + std::to_string(seq));
    };

    auto bump_node = [&](const std::string& node, int delta, std::uint64_t seq) {
        int& b = busy[node];
        b += delta;
        if (b < 0) note("node accounting underflow on " + node, seq);
        auto cap = capacity.find(node);
        if (cap == capacity.end()) {
            note("unknown node " + node, seq);
        } else if (b > cap->second) {
            note("node " + node + " over capacity (" + std::to_string(b) + ")", seq);
        }
        auto& mx = audit.max_busy_by_node[node];
        if (b > mx) mx = b;
    };

    auto bump_ops = [&](int delta, std::uint64_t seq) {
        tasks += delta;
        connections += delta;
        if (tasks > limits.max_concurrent_tasks) {
            note("tasks over limit (" + std::to_string(tasks) + ")", seq);
        }
        if (connections > limits.max_api_connections) {
            note("connections over limit (" + std::to_string(connections) + ")", seq);
        }
        if (tasks < 0 || connections < 0) note("op accounting underflow", seq);
        audit.max_tasks = std::max(audit.max_tasks, tasks);
        audit.max_connections = std::max(audit.max_connections, connections);
    };

    for (const auto& ev : journal.events()) {
        if (std::holds_alternative<journal::AdmitPayload>(ev.payload)) {
            ++vms;
            if (vms > limits.max_concurrent_vms) {
                note("vms over limit (" + std::to_string(vms) + ")", ev.seq);
            }
            audit.max_vms = std::max(audit.max_vms, vms);
            bump_node(ev.node, +1, ev.seq);
            bump_ops(+1, ev.seq);
        } else if (const auto* tr = std::get_if<journal::TransitionPayload>(&ev.payload)) {
            if (tr->from == "booting" && tr->to == "static_scan") {
                bump_ops(-1, ev.seq);
            } else if (tr->from == "collecting" && tr->to == "reverting") {
                bump_ops(+1, ev.seq);
            } else if (tr->from == "reverting" && tr->to == "done") {
                bump_ops(-1, ev.seq);
                bump_node(ev.node, -1, ev.seq);
                --vms;
            } else if (tr->to == "crashed") {
                if (tr->from == "booting" || tr->from == "reverting") bump_ops(-1, ev.seq);
                bump_node(ev.node, -1, ev.seq);
                --vms;
            }
            if (vms < 0) note("vm accounting underflow", ev.seq);
        }
    }
    if (tasks != 0 || connections != 0 || vms != 0) {
        audit.violations.push_back("resources not fully released at journal end");
    }
    return audit;
}

std::map<std::string, PhaseSpan> phase_spans(const RunJournal& journal) {
    std::map<std::string, PhaseSpan> spans;
    for (const auto& ev : journal.events()) {
        const auto* ph = std::get_if<journal::PhasePayload>(&ev.payload);
        if (ph == nullptr) continue;
        auto& span = spans[ph->phase];
        if (ph->action == "start") span.start = ev.sim_time;
        if (ph->action == "end") span.end = ev.sim_time;
    }
    return spans;
}

std::map<std::string, SimTime> completion_times(const RunJournal& journal,
                                                std::string_view phase) {
    std::map<std::string, SimTime> times;
    for (const auto& ev : journal.events()) {
        const auto* tr = std::get_if<journal::TransitionPayload>(&ev.payload);
        if (tr == nullptr || tr->phase != phase) continue;
        if (tr->to == "done" || tr->to == "incomplete") times[tr->sample] = ev.sim_time;
    }
    return times;
}

}  // namespace rangeforge::scheduler
