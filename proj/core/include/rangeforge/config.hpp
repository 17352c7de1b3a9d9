#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rangeforge/netrange.hpp"
#include "rangeforge/scheduler.hpp"
#include "rangeforge/scoring.hpp"

namespace rangeforge::config {

/// An endpoint-challenge config resolved down to run inputs: topology loaded,
/// corpus built (from a manifest file or the synthetic generator), zero-days
/// injected, detector validated. config_digest covers the canonical resolved
/// document, so a seed override lands in the journal header.
struct ResolvedRun {
    scheduler::RunInputs inputs;
    scoring::CostParams cost;
    std::string detector_name;

    // canonical serializations for runs/<id>/inputs/
    std::string config_json;
    std::string topology_json;
    std::string detector_json;
};

struct SurgeSpec {
    double factor = 1.0;
    SimTime t0 = 0;
    SimTime t1 = 0;
};

struct ResolvedNet {
    netrange::NetConfig net;
    std::vector<std::string> devices;
    std::vector<SurgeSpec> surges;
    SimTime match_slack = seconds(60);
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string config_json;
};

/// "endpoint" or "network", from the config's mode field.
std::string config_mode(const std::string& path);

/// Scheduler parameters alone (limits, timings, deploy, phases, seed) from a
/// config document. Replay uses this against the resolved inputs stored in a
/// run directory, so no external refs are touched.
scheduler::RunParams run_params_from_config_text(const std::string& text,
                                                 const std::string& source_name);

/// Cost section of a config document, or defaults when absent.
scoring::CostParams cost_params_from_config_text(const std::string& text,
                                                 const std::string& source_name);

ResolvedRun load_run_config(const std::string& path,
                            std::optional<std::uint64_t> seed_override);
ResolvedNet load_net_config(const std::string& path,
                            std::optional<std::uint64_t> seed_override);

}  // namespace rangeforge::config
