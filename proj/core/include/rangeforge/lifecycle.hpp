#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rangeforge/time.hpp"

namespace rangeforge::lifecycle {

enum class TrialState : std::uint8_t {
    Provisioned,
    Booting,
    StaticScan,
    DynamicExec,
    Collecting,
    Reverting,
    Done,
    Crashed,
    Incomplete,
};

enum class Stage : std::uint8_t { Static, Dynamic };

/// What the detector did about a positive verdict. All of them count as a
/// malicious determination when scoring.
enum class Action : std::uint8_t { Blocked, Warned, Quarantined, Flagged };

std::string_view to_string(TrialState state);
std::string_view to_string(Stage stage);
std::string_view to_string(Action action);
TrialState trial_state_from_string(std::string_view text);
Stage stage_from_string(std::string_view text);
Action action_from_string(std::string_view text);

/// Per-stage budgets. static_timeout defaults to the 92 s experiment budget;
/// the one-minute figure for the stage is treated as the scheduling quantum
/// of the surrounding lifecycle and both are plain config.
struct StageTimings {
    SimTime boot = seconds(60);
    SimTime static_timeout = seconds(92);
    SimTime dynamic_timeout = seconds(60);
    SimTime collect = seconds(60);
    SimTime revert = seconds(8);

    void validate() const;
};

struct ResourceDraw {
    std::int64_t cpu_ms = 0;
    std::int64_t peak_mem_mb = 0;
};

/// A positive (malicious) verdict. t_det counts from sample presentation and
/// must fall inside the stage budget: static <= static_timeout, dynamic <=
/// static_timeout + dynamic_timeout.
struct Determination {
    Stage stage = Stage::Static;
    SimTime t_det = 0;
    ResourceDraw resources;
    Action action = Action::Flagged;
};

struct Trial {
    std::string trial_id;
    std::string sample_id;
    std::string node;
    int attempt = 1;
    TrialState state = TrialState::Provisioned;
    SimTime started_at = 0;
    std::optional<SimTime> presented_at;
    std::optional<Determination> determination;
};

struct Event {
    enum class Kind : std::uint8_t {
        PowerOn,
        BootComplete,
        Verdict,
        StageTimeout,
        CollectComplete,
        RevertComplete,
        Crash,
        Retry,
        GiveUp,
    };

    Kind kind = Kind::PowerOn;
    std::optional<Determination> determination;  // Verdict only
};

std::string_view to_string(Event::Kind kind);

/// States from Provisioned up to Reverting; any of them may crash.
bool is_active(TrialState state);

/// Pure transition function. Throws on an illegal (state, event) pair naming
/// both; the input trial is never mutated.
Trial advance(const Trial& trial, const Event& event, const StageTimings& timings, SimTime now);

/// Reverting -> Done; the slot becomes reusable and nothing from the sample
/// survives (the next trial on the slot is a freshly constructed Trial).
Trial revert(const Trial& trial);

/// Wall time of a completed trial under early-exit semantics:
/// boot + actual static + actual dynamic (0 when skipped) + collect + revert.
SimTime trial_wall_time(const Trial& trial, const StageTimings& timings);

}  // namespace rangeforge::lifecycle
