#include "rangeforge/lifecycle.hpp"

#include "rangeforge/error.hpp"

namespace rangeforge::lifecycle {

std::string_view to_string(TrialState state) {
    switch (state) {
        case TrialState::Provisioned: return "provisioned";
        case TrialState::Booting: return "booting";
        case TrialState::StaticScan: return "static_scan";
        case TrialState::DynamicExec: return "dynamic_exec";
        case TrialState::Collecting: return "collecting";
        case TrialState::Reverting: return "reverting";
        case TrialState::Done: return "done";
        case TrialState::Crashed: return "crashed";
        case TrialState::Incomplete: return "incomplete";
    }
    return "?";
}

TrialState trial_state_from_string(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(TrialState::Incomplete); ++i) {
        const auto s = static_cast<TrialState>(i);
        if (to_string(s) == text) return s;
    }
    throw ValidationError("unknown trial state: " + std::string(text));
}

std::string_view to_string(Stage stage) {
    return stage == Stage::Static ? "static" : "dynamic";
}

Stage stage_from_string(std::string_view text) {
    if (text == "static") return Stage::Static;
    if (text == "dynamic") return Stage::Dynamic;
    throw ValidationError("unknown stage: " + std::string(text));
}

std::string_view to_string(Action action) {
    switch (action) {
        case Action::Blocked: return "blocked";
        case Action::Warned: return "warned";
        case Action::Quarantined: return "quarantined";
        case Action::Flagged: return "flagged";
    }
    return "?";
}

Action action_from_string(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(Action::Flagged); ++i) {
        const auto a = static_cast<Action>(i);
        if (to_string(a) == text) return a;
    }
    throw ValidationError("unknown action: " + std::string(text));
}

std::string_view to_string(Event::Kind kind) {
    switch (kind) {
        case Event::Kind::PowerOn: return "power_on";
        case Event::Kind::BootComplete: return "boot_complete";
        case Event::Kind::Verdict: return "verdict";
        case Event::Kind::StageTimeout: return "stage_timeout";
        case Event::Kind::CollectComplete: return "collect_complete";
        case Event::Kind::RevertComplete: return "revert_complete";
        case Event::Kind::Crash: return "crash";
        case Event::Kind::Retry: return "retry";
        case Event::Kind::GiveUp: return "give_up";
    }
    return "?";
}

void StageTimings::validate() const {
    for (SimTime t : {boot, static_timeout, dynamic_timeout, collect, revert}) {
        if (t < 0) throw ValidationError("stage timings must be nonnegative");
    }
}

bool is_active(TrialState state) {
    return state == TrialState::Provisioned || state == TrialState::Booting ||
           state == TrialState::StaticScan || state == TrialState::DynamicExec ||
           state == TrialState::Collecting || state == TrialState::Reverting;
}

namespace {

[[noreturn]] void illegal(const Trial& trial, const Event& event) {
    throw ValidationError("illegal transition: event '" +
                          std::string(to_string(event.kind)) + "' in state '" +
                          std::string(to_string(trial.state)) + "' (trial " +
                          trial.trial_id + ")");
}

void check_determination(const Determination& det, const StageTimings& timings) {
    if (det.t_det < 0) throw ValidationError("determination with negative t_det");
    if (det.stage == Stage::Static && det.t_det > timings.static_timeout) {
        throw ValidationError("static determination after the static budget");
    }
    if (det.stage == Stage::Dynamic &&
        det.t_det > timings.static_timeout + timings.dynamic_timeout) {
        throw ValidationError("dynamic determination after the dynamic budget");
    }
}

}  // namespace

Trial advance(const Trial& trial, const Event& event, const StageTimings& timings,
              SimTime now) {
    Trial next = trial;

    if (event.kind == Event::Kind::Crash) {
        if (!is_active(trial.state)) illegal(trial, event);
        next.state = TrialState::Crashed;
        next.determination.reset();  // crashed attempts carry no determination
        return next;
    }

    switch (trial.state) {
        case TrialState::Provisioned:
            if (event.kind != Event::Kind::PowerOn) illegal(trial, event);
            next.state = TrialState::Booting;
            return next;

        case TrialState::Booting:
            if (event.kind != Event::Kind::BootComplete) illegal(trial, event);
            next.state = TrialState::StaticScan;
            next.presented_at = now;
            return next;

        case TrialState::StaticScan:
            if (event.kind == Event::Kind::Verdict) {
                if (!event.determination || event.determination->stage != Stage::Static) {
                    throw ValidationError("static verdict without a static determination");
                }
                if (trial.determination) {
                    throw ValidationError("determination already set for trial " + trial.trial_id);
                }
                check_determination(*event.determination, timings);
                next.determination = event.determination;
                next.state = TrialState::Collecting;  // verdict skips DynamicExec
                return next;
            }
            if (event.kind == Event::Kind::StageTimeout) {
                next.state = TrialState::DynamicExec;
                return next;
            }
            illegal(trial, event);

        case TrialState::DynamicExec:
            if (event.kind == Event::Kind::Verdict) {
                if (!event.determination || event.determination->stage != Stage::Dynamic) {
                    throw ValidationError("dynamic verdict without a dynamic determination");
                }
                if (trial.determination) {
                    throw ValidationError("determination already set for trial " + trial.trial_id);
                }
                check_determination(*event.determination, timings);
                next.determination = event.determination;
                next.state = TrialState::Collecting;
                return next;
            }
            if (event.kind == Event::Kind::StageTimeout) {
                next.state = TrialState::Collecting;  // silence scores as benign
                return next;
            }
            illegal(trial, event);

        case TrialState::Collecting:
            if (event.kind != Event::Kind::CollectComplete) illegal(trial, event);
            next.state = TrialState::Reverting;
            return next;

        case TrialState::Reverting:
            if (event.kind != Event::Kind::RevertComplete) illegal(trial, event);
            next.state = TrialState::Done;
            return next;

        case TrialState::Crashed:
            if (event.kind == Event::Kind::Retry) {
                Trial fresh;
                fresh.sample_id = trial.sample_id;
                fresh.attempt = trial.attempt + 1;
                fresh.state = TrialState::Provisioned;
                fresh.started_at = now;
                return fresh;
            }
            if (event.kind == Event::Kind::GiveUp) {
                next.state = TrialState::Incomplete;
                return next;
            }
            illegal(trial, event);

        case TrialState::Done:
        case TrialState::Incomplete:
            illegal(trial, event);
    }
    illegal(trial, event);
}

Trial revert(const Trial& trial) {
    if (trial.state != TrialState::Reverting) {
        throw ValidationError("revert requires state 'reverting', trial " + trial.trial_id +
                              " is '" + std::string(to_string(trial.state)) + "'");
    }
    Trial next = trial;
    next.state = TrialState::Done;
    return next;
}

SimTime trial_wall_time(const Trial& trial, const StageTimings& timings) {
    if (trial.state != TrialState::Done) {
        throw ValidationError("trial_wall_time requires a Done trial, got '" +
                              std::string(to_string(trial.state)) + "'");
    }
    SimTime static_len = timings.static_timeout;
    SimTime dynamic_len = timings.dynamic_timeout;
    if (trial.determination) {
        if (trial.determination->stage == Stage::Static) {
            static_len = trial.determination->t_det;
            dynamic_len = 0;
        } else {
            dynamic_len = trial.determination->t_det - timings.static_timeout;
        }
    }
    return timings.boot + static_len + dynamic_len + timings.collect + timings.revert;
}

}  // namespace rangeforge::lifecycle
