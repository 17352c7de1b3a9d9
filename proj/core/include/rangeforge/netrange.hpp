#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rangeforge/time.hpp"

namespace rangeforge::netrange {

enum class StepTag : std::uint8_t {
    Reconnaissance,
    Exploitation,
    LateralMovement,
    CommandAndControl,
    Exfiltration,
};

enum class Covertness : std::uint8_t { Overt, Moderate, Covert };

std::string_view to_string(StepTag tag);
std::string_view to_string(Covertness level);
StepTag step_tag_from_string(std::string_view text);
Covertness covertness_from_string(std::string_view text);

struct AttackStep {
    StepTag tag = StepTag::Reconnaissance;
    SimTime t0 = 0;
    SimTime t1 = 0;
};

/// One campaign: ordered steps with time windows, a subtlety level, and a
/// naive flag (the zero-day proxy for network detectors).
struct AttackEvent {
    std::string attack_id;
    std::vector<AttackStep> steps;
    Covertness covertness = Covertness::Overt;
    bool naive = false;
};

struct GroundTruth {
    enum class Kind : std::uint8_t { Background, EmulatedBenign, Attack };
    Kind kind = Kind::Background;
    std::string attack_id;  // attack segments only
    StepTag step = StepTag::Reconnaissance;
};

/// A labeled flow segment. ground truth is scoring metadata and never reaches
/// the device-facing serialization.
struct TrafficSegment {
    SimTime t_start = 0;
    SimTime t_end = 0;
    std::string src;
    std::string dst;
    std::int64_t bytes = 0;
    GroundTruth truth;
};

struct NetConfig {
    SimTime duration = seconds(900);
    double background_rate_gbps = 1.25;
    int background_hosts = 1600;
    int emulated_hosts = 400;
    double training_fraction = 0.2;  // attack-free prefix of the timeline
    int max_emulated_run = 4;        // address-spread bound (consecutive addresses)
    std::vector<AttackEvent> schedule;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrafficTimeline {
    std::vector<TrafficSegment> segments;  // ordered by (t_start, generation order)
    SimTime duration = 0;
    double background_rate_gbps = 0.0;
    SimTime training_end = 0;
    std::vector<std::string> addresses;  // full space, generation order
    std::vector<std::string> emulated;   // interleaved subset
    std::vector<AttackEvent> schedule;
    std::uint64_t seed = 0;
};

/// Deterministic under the seed. Benign byte totals per sliding window track
/// background_rate_gbps within a few percent; emulated hosts draw from the
/// same behavior mixture as background hosts so the two populations are
/// statistically indistinguishable; attack segments follow the schedule.
TrafficTimeline build_timeline(const NetConfig& config);

/// Scales the density of non-attack segments whose start falls inside
/// [t0, t1); attack segments are untouched and out-of-window traffic is
/// byte-identical.
TrafficTimeline surge(const TrafficTimeline& timeline, double factor, SimTime t0, SimTime t1);

/// Rate over segments starting in [t0, t1), in Gbps.
double window_rate_gbps(const TrafficTimeline& timeline, SimTime t0, SimTime t1);

/// Min/max of window_rate_gbps over all full windows at 1 s steps.
std::pair<double, double> sliding_rate_extrema(const TrafficTimeline& timeline,
                                               SimTime window);

/// Device-facing serialization of one segment: t_start, t_end, src, dst,
/// bytes. No ground truth, by construction.
std::string device_line(const TrafficSegment& segment);

struct DeviceStream {
    std::string device_id;
    std::string digest;  // sha256 of the full stream bytes
    std::size_t lines = 0;
};

using StreamSink = std::function<void(const std::string& device_id, const std::string& line)>;

/// Serializes the timeline once per device (each stream produced and digested
/// independently) and reports the per-device digests; they must all be equal.
std::vector<DeviceStream> fanout(const TrafficTimeline& timeline,
                                 const std::vector<std::string>& device_ids,
                                 const StreamSink& sink = {});

struct DeviceAlert {
    std::string device_id;
    SimTime t_alert = 0;
    StepTag claimed_type = StepTag::Reconnaissance;
    std::vector<std::string> claimed_addresses;
};

std::string alert_to_json_line(const DeviceAlert& alert);
std::vector<DeviceAlert> alerts_from_jsonl(std::istream& in, const std::string& source_name,
                                           const std::string& device_id);
std::vector<DeviceAlert> load_alerts(const std::string& path, const std::string& device_id);

struct CovSplit {
    std::int64_t tp = 0;
    std::int64_t fn = 0;
};

struct CampaignScore {
    std::string attack_id;
    std::int64_t steps_total = 0;
    std::int64_t steps_detected = 0;
};

struct NetScore {
    std::string device_id;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::map<std::string, CovSplit> by_covertness;
    CovSplit naive;
    CovSplit seen;
    std::vector<CampaignScore> campaigns;

    std::string to_json_text() const;
};

/// An alert is a TP for step s when its type matches and t_alert falls in
/// [t0 - slack, t1 + slack]; each alert credits at most one step (earliest
/// window, tie-break by attack id then step index). Unmatched alerts are FPs;
/// steps with no credited alert are FNs. Devices score independently.
std::vector<NetScore> score_detections(
    const std::map<std::string, std::vector<DeviceAlert>>& alerts_by_device,
    const std::vector<AttackEvent>& schedule, SimTime slack,
    const std::vector<std::string>& devices);

/// Ground-truth schedule (de)serialization; lives in its own file, never next
/// to the device streams.
std::string schedule_to_json_text(const std::vector<AttackEvent>& schedule);
std::vector<AttackEvent> schedule_from_json_text(const std::string& text,
                                                 const std::string& source_name);

}  // namespace rangeforge::netrange
