#include "rangeforge/netrange.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rangeforge/digest.hpp"
#include "rangeforge/error.hpp"
#include "rangeforge/rng.hpp"

namespace rangeforge::netrange {

using nlohmann::json;

std::string_view to_string(StepTag tag) {
    switch (tag) {
        case StepTag::Reconnaissance: return "reconnaissance";
        case StepTag::Exploitation: return "exploitation";
        case StepTag::LateralMovement: return "lateral_movement";
        case StepTag::CommandAndControl: return "command_and_control";
        case StepTag::Exfiltration: return "exfiltration";
    }
    return "?";
}

StepTag step_tag_from_string(std::string_view text) {
    for (StepTag t : {StepTag::Reconnaissance, StepTag::Exploitation, StepTag::LateralMovement,
                      StepTag::CommandAndControl, StepTag::Exfiltration}) {
        if (to_string(t) == text) return t;
    }
    throw ValidationError("unknown attack step tag: " + std::string(text));
}

std::string_view to_string(Covertness level) {
    switch (level) {
        case Covertness::Overt: return "overt";
        case Covertness::Moderate: return "moderate";
        case Covertness::Covert: return "covert";
    }
    return "?";
}

Covertness covertness_from_string(std::string_view text) {
    for (Covertness c : {Covertness::Overt, Covertness::Moderate, Covertness::Covert}) {
        if (to_string(c) == text) return c;
    }
    throw ValidationError("unknown covertness level: " + std::string(text));
}

void NetConfig::validate() const {
    if (duration <= 0) throw ValidationError("net duration must be positive");
    if (background_rate_gbps <= 0.0) throw ValidationError("background rate must be positive");
    if (background_hosts < 1 || emulated_hosts < 0) {
        throw ValidationError("host counts out of range");
    }
    if (training_fraction < 0.0 || training_fraction >= 1.0) {
        throw ValidationError("training_fraction must be in [0,1)");
    }
    if (max_emulated_run < 1) throw ValidationError("max_emulated_run must be >= 1");
    const SimTime training_end =
        static_cast<SimTime>(training_fraction * static_cast<double>(duration));
    for (const auto& attack : schedule) {
        if (attack.attack_id.empty()) throw ValidationError("attack without an id");
        SimTime prev = 0;
        for (const auto& step : attack.steps) {
            if (step.t0 >= step.t1) {
                throw ValidationError("attack '" + attack.attack_id +
                                      "': step window inverted");
            }
            if (step.t1 > duration) {
                throw ValidationError("attack '" + attack.attack_id +
                                      "' falls outside the timeline duration");
            }
            if (step.t0 < training_end) {
                throw ValidationError("attack '" + attack.attack_id +
                                      "' overlaps the training period");
            }
            if (step.t0 < prev) {
                throw ValidationError("attack '" + attack.attack_id + "': steps out of order");
            }
            prev = step.t0;
        }
    }
}

namespace {

std::string address_for(int index) {
    const int v = index + 257;  // skip the .0.0 corner of the space
    char buf[24];
    std::snprintf(buf, sizeof(buf), "10.%d.%d.%d", (v >> 16) & 255, (v >> 8) & 255, v & 255);
    return buf;
}

/// Behavior mixture shared by background and emulated hosts: login bursts,
/// mail, web, and server interactions. Same draw for both populations, which
/// is what the indistinguishability check leans on.
std::int64_t draw_segment_bytes(Rng& stream) {
    const double u = stream.uniform01();
    if (u < 0.10) return stream.uniform_int(200, 2'000);            // login/logout chatter
    if (u < 0.30) return stream.uniform_int(1'000, 50'000);         // mail
    if (u < 0.90) return stream.uniform_int(2'000, 200'000);        // web
    return stream.uniform_int(1 << 20, 20 << 20);                   // server transfer
}

/// Jittered-stride pick of emulated addresses: spread across the space with
/// a gap of at least two, so no two emulated addresses are ever adjacent.
std::vector<int> pick_emulated_indices(int total, int emulated, Rng stream) {
    std::vector<int> picks;
    if (emulated <= 0) return picks;
    const int stride = std::max(2, total / emulated);
    picks.reserve(static_cast<std::size_t>(emulated));
    for (int i = 0; i < emulated; ++i) {
        const int base = i * stride;
        const int jitter =
            stride > 2 ? static_cast<int>(stream.below(static_cast<std::uint64_t>(stride - 1)))
                       : 0;
        picks.push_back(std::min(base + jitter, total - 1));
    }
    return picks;
}

}  // namespace

TrafficTimeline build_timeline(const NetConfig& config) {
    config.validate();

    TrafficTimeline timeline;
    timeline.duration = config.duration;
    timeline.background_rate_gbps = config.background_rate_gbps;
    timeline.training_end =
        static_cast<SimTime>(config.training_fraction * static_cast<double>(config.duration));
    timeline.schedule = config.schedule;
    timeline.seed = config.seed;

    const int total_hosts = config.background_hosts + config.emulated_hosts;
    timeline.addresses.reserve(static_cast<std::size_t>(total_hosts));
    for (int i = 0; i < total_hosts; ++i) timeline.addresses.push_back(address_for(i));

    const Rng root = Rng(config.seed).substream("timeline");
    std::vector<bool> is_emulated(static_cast<std::size_t>(total_hosts), false);
    for (int idx : pick_emulated_indices(total_hosts, config.emulated_hosts,
                                         root.substream("addresses"))) {
        if (!is_emulated[static_cast<std::size_t>(idx)]) {
            is_emulated[static_cast<std::size_t>(idx)] = true;
            timeline.emulated.push_back(timeline.addresses[static_cast<std::size_t>(idx)]);
        }
    }
    std::sort(timeline.emulated.begin(), timeline.emulated.end());

    // Benign traffic: per-second epochs with a jittered byte budget, filled
    // with mixture-distributed segments. Hosts are picked uniformly, so
    // emulated hosts originate their population share of the traffic.
    const double bytes_per_s = config.background_rate_gbps * 1e9 / 8.0;
    const auto epochs = static_cast<std::int64_t>(config.duration / 1000);
    for (std::int64_t e = 0; e < epochs; ++e) {
        Rng stream = root.substream("epoch/" + std::to_string(e));
        const double budget = bytes_per_s * (0.96 + 0.08 * stream.uniform01());
        double acc = 0.0;
        while (acc < budget) {
            TrafficSegment seg;
            seg.bytes = draw_segment_bytes(stream);
            seg.t_start = e * 1000 + stream.uniform_int(0, 999);
            const SimTime span = stream.uniform_int(100, 5000);
            seg.t_end = std::min<SimTime>(seg.t_start + span, config.duration);
            if (seg.t_end <= seg.t_start) seg.t_end = seg.t_start + 1;
            const auto src_idx = static_cast<std::size_t>(
                stream.below(static_cast<std::uint64_t>(total_hosts)));
            auto dst_idx = static_cast<std::size_t>(
                stream.below(static_cast<std::uint64_t>(total_hosts - 1)));
            if (dst_idx >= src_idx) ++dst_idx;
            seg.src = timeline.addresses[src_idx];
            seg.dst = timeline.addresses[dst_idx];
            seg.truth.kind = is_emulated[src_idx] ? GroundTruth::Kind::EmulatedBenign
                                                  : GroundTruth::Kind::Background;
            acc += static_cast<double>(seg.bytes);
            timeline.segments.push_back(std::move(seg));
        }
    }

    // Attack traffic per schedule. Volume scales with overtness; covert steps
    // blend into the mixture.
    for (const auto& attack : config.schedule) {
        Rng stream = root.substream("attack/" + attack.attack_id);
        int per_step = 3;
        double size_mult = 1.0;
        if (attack.covertness == Covertness::Overt) {
            per_step = 24;
            size_mult = 3.0;
        } else if (attack.covertness == Covertness::Moderate) {
            per_step = 9;
            size_mult = 1.5;
        }
        const auto attacker_idx = static_cast<std::size_t>(
            stream.below(static_cast<std::uint64_t>(total_hosts)));
        for (const auto& step : attack.steps) {
            for (int k = 0; k < per_step; ++k) {
                TrafficSegment seg;
                seg.t_start = stream.uniform_int(step.t0, step.t1 - 1);
                seg.t_end = std::min<SimTime>(seg.t_start + stream.uniform_int(100, 3000),
                                              config.duration);
                if (seg.t_end <= seg.t_start) seg.t_end = seg.t_start + 1;
                seg.bytes = static_cast<std::int64_t>(
                    size_mult * static_cast<double>(draw_segment_bytes(stream)));
                seg.src = timeline.addresses[attacker_idx];
                const auto victim = timeline.emulated.empty()
                                        ? timeline.addresses[static_cast<std::size_t>(
                                              stream.below(static_cast<std::uint64_t>(
                                                  total_hosts)))]
                                        : timeline.emulated[static_cast<std::size_t>(
                                              stream.below(timeline.emulated.size()))];
                seg.dst = victim;
                seg.truth.kind = GroundTruth::Kind::Attack;
                seg.truth.attack_id = attack.attack_id;
                seg.truth.step = step.tag;
                timeline.segments.push_back(std::move(seg));
            }
        }
    }

    std::stable_sort(timeline.segments.begin(), timeline.segments.end(),
                     [](const TrafficSegment& a, const TrafficSegment& b) {
                         return a.t_start < b.t_start;
                     });
    return timeline;
}

TrafficTimeline surge(const TrafficTimeline& timeline, double factor, SimTime t0, SimTime t1) {
    if (factor <= 0.0) throw ValidationError("surge factor must be positive");
    if (t0 < 0 || t1 > timeline.duration || t0 >= t1) {
        throw ValidationError("surge window outside the timeline");
    }

    TrafficTimeline out = timeline;
    if (factor == 1.0) return out;

    Rng stream = Rng(timeline.seed)
                     .substream("surge/" + std::to_string(t0) + "/" + std::to_string(t1));
    const auto whole = static_cast<int>(std::floor(factor));
    const double frac = factor - std::floor(factor);

    std::vector<TrafficSegment> extra;
    for (const auto& seg : timeline.segments) {
        if (seg.truth.kind == GroundTruth::Kind::Attack) continue;
        if (seg.t_start < t0 || seg.t_start >= t1) continue;
        int copies = whole - 1 + (stream.bernoulli(frac) ? 1 : 0);
        for (int c = 0; c < copies; ++c) {
            TrafficSegment clone = seg;
            const SimTime jitter = stream.uniform_int(-2000, 2000);
            clone.t_start = std::clamp<SimTime>(seg.t_start + jitter, t0, t1 - 1);
            clone.t_end = std::min<SimTime>(clone.t_start + (seg.t_end - seg.t_start),
                                            timeline.duration);
            if (clone.t_end <= clone.t_start) clone.t_end = clone.t_start + 1;
            extra.push_back(std::move(clone));
        }
    }
    out.segments.insert(out.segments.end(), extra.begin(), extra.end());
    std::stable_sort(out.segments.begin(), out.segments.end(),
                     [](const TrafficSegment& a, const TrafficSegment& b) {
                         return a.t_start < b.t_start;
                     });
    return out;
}

double window_rate_gbps(const TrafficTimeline& timeline, SimTime t0, SimTime t1) {
    if (t1 <= t0) throw ValidationError("rate window inverted");
    std::int64_t bytes = 0;
    for (const auto& seg : timeline.segments) {
        if (seg.t_start >= t0 && seg.t_start < t1) bytes += seg.bytes;
    }
    return static_cast<double>(bytes) * 8.0 / (to_seconds(t1 - t0) * 1e9);
}

std::pair<double, double> sliding_rate_extrema(const TrafficTimeline& timeline,
                                               SimTime window) {
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (SimTime t0 = 0; t0 + window <= timeline.duration; t0 += 1000) {
        const double rate = window_rate_gbps(timeline, t0, t0 + window);
        if (first || rate < lo) lo = rate;
        if (first || rate > hi) hi = rate;
        first = false;
    }
    if (first) throw ValidationError("timeline shorter than the rate window");
    return {lo, hi};
}

std::string device_line(const TrafficSegment& segment) {
    return json{{"t_start", segment.t_start},
                {"t_end", segment.t_end},
                {"src", segment.src},
                {"dst", segment.dst},
                {"bytes", segment.bytes}}
        .dump();
}

std::vector<DeviceStream> fanout(const TrafficTimeline& timeline,
                                 const std::vector<std::string>& device_ids,
                                 const StreamSink& sink) {
    if (device_ids.empty()) throw ValidationError("fanout needs at least one device");
    std::vector<DeviceStream> streams;
    streams.reserve(device_ids.size());
    for (const auto& device : device_ids) {
        Sha256 digest;
        std::size_t lines = 0;
        for (const auto& seg : timeline.segments) {
            std::string line = device_line(seg);
            digest.update(line);
            digest.update("\n");
            if (sink) sink(device, line);
            ++lines;
        }
        streams.push_back(DeviceStream{device, digest.hex_digest(), lines});
    }
    return streams;
}

std::string alert_to_json_line(const DeviceAlert& alert) {
    json addrs = json::array();
    for (const auto& a : alert.claimed_addresses) addrs.push_back(a);
    return json{{"t_alert", alert.t_alert},
                {"type", std::string(to_string(alert.claimed_type))},
                {"addresses", addrs}}
        .dump();
}

std::vector<DeviceAlert> alerts_from_jsonl(std::istream& in, const std::string& source_name,
                                           const std::string& device_id) {
    std::vector<DeviceAlert> alerts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw ParseError(source_name, line_no, "invalid JSON");
        DeviceAlert alert;
        alert.device_id = device_id;
        try {
            alert.t_alert = doc.at("t_alert").get<SimTime>();
            alert.claimed_type = step_tag_from_string(doc.at("type").get<std::string>());
            for (const auto& a : doc.value("addresses", json::array())) {
                alert.claimed_addresses.push_back(a.get<std::string>());
            }
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        }
        alerts.push_back(std::move(alert));
    }
    return alerts;
}

std::vector<DeviceAlert> load_alerts(const std::string& path, const std::string& device_id) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open alerts: " + path);
    return alerts_from_jsonl(in, path, device_id);
}

std::vector<NetScore> score_detections(
    const std::map<std::string, std::vector<DeviceAlert>>& alerts_by_device,
    const std::vector<AttackEvent>& schedule, SimTime slack,
    const std::vector<std::string>& devices) {
    if (slack < 0) throw ValidationError("matching slack must be nonnegative");
    for (const auto& [device, alerts] : alerts_by_device) {
        if (std::find(devices.begin(), devices.end(), device) == devices.end()) {
            throw ValidationError("alerts for unknown device '" + device + "'");
        }
        (void)alerts;
    }

    struct FlatStep {
        const AttackEvent* attack;
        const AttackStep* step;
        std::size_t index;  // within the campaign
    };
    std::vector<FlatStep> steps;
    for (const auto& attack : schedule) {
        for (std::size_t i = 0; i < attack.steps.size(); ++i) {
            steps.push_back({&attack, &attack.steps[i], i});
        }
    }

    std::vector<NetScore> scores;
    for (const auto& device : devices) {
        NetScore score;
        score.device_id = device;
        for (Covertness c : {Covertness::Overt, Covertness::Moderate, Covertness::Covert}) {
            score.by_covertness[std::string(to_string(c))];
        }

        std::vector<bool> detected(steps.size(), false);
        auto it = alerts_by_device.find(device);
        if (it != alerts_by_device.end()) {
            for (const auto& alert : it->second) {
                // Earliest compatible window, tie-break by attack id then
                // step index; one alert credits at most one step.
                const FlatStep* best = nullptr;
                std::size_t best_idx = 0;
                for (std::size_t i = 0; i < steps.size(); ++i) {
                    const FlatStep& fs = steps[i];
                    if (fs.step->tag != alert.claimed_type) continue;
                    if (alert.t_alert < fs.step->t0 - slack ||
                        alert.t_alert > fs.step->t1 + slack) {
                        continue;
                    }
                    if (best == nullptr || fs.step->t0 < best->step->t0 ||
                        (fs.step->t0 == best->step->t0 &&
                         (fs.attack->attack_id < best->attack->attack_id ||
                          (fs.attack->attack_id == best->attack->attack_id &&
                           fs.index < best->index)))) {
                        best = &fs;
                        best_idx = i;
                    }
                }
                if (best == nullptr) {
                    ++score.fp;
                } else {
                    ++score.tp;
                    detected[best_idx] = true;
                    auto& cov = score.by_covertness[std::string(
                        to_string(best->attack->covertness))];
                    ++cov.tp;
                    ++(best->attack->naive ? score.naive : score.seen).tp;
                }
            }
        }

        std::map<std::string, CampaignScore> campaigns;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const FlatStep& fs = steps[i];
            auto& camp = campaigns[fs.attack->attack_id];
            camp.attack_id = fs.attack->attack_id;
            ++camp.steps_total;
            if (detected[i]) {
                ++camp.steps_detected;
            } else {
                ++score.fn;
                auto& cov =
                    score.by_covertness[std::string(to_string(fs.attack->covertness))];
                ++cov.fn;
                ++(fs.attack->naive ? score.naive : score.seen).fn;
            }
        }
        for (auto& [id, camp] : campaigns) score.campaigns.push_back(camp);
        scores.push_back(std::move(score));
    }
    return scores;
}

std::string NetScore::to_json_text() const {
    json cov = json::object();
    for (const auto& [level, split] : by_covertness) {
        cov[level] = {{"tp", split.tp}, {"fn", split.fn}};
    }
    json camps = json::array();
    for (const auto& c : campaigns) {
        camps.push_back({{"attack_id", c.attack_id},
                         {"steps_total", c.steps_total},
                         {"steps_detected", c.steps_detected}});
    }
    return json{{"device", device_id},
                {"tp", tp},
                {"fp", fp},
                {"fn", fn},
                {"by_covertness", cov},
                {"naive", {{"tp", naive.tp}, {"fn", naive.fn}}},
                {"seen", {{"tp", seen.tp}, {"fn", seen.fn}}},
                {"campaigns", camps}}
        .dump(2);
}

std::string schedule_to_json_text(const std::vector<AttackEvent>& schedule) {
    json doc = json::array();
    for (const auto& attack : schedule) {
        json steps = json::array();
        for (const auto& step : attack.steps) {
            steps.push_back({{"type", std::string(to_string(step.tag))},
                             {"t0", step.t0},
                             {"t1", step.t1}});
        }
        doc.push_back({{"attack_id", attack.attack_id},
                       {"covertness", std::string(to_string(attack.covertness))},
                       {"naive", attack.naive},
                       {"steps", steps}});
    }
    return doc.dump(2) + "\n";
}

std::vector<AttackEvent> schedule_from_json_text(const std::string& text,
                                                 const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw ValidationError(source_name + ": attack schedule must be a JSON array");
    }
    std::vector<AttackEvent> schedule;
    try {
        for (const auto& row : doc) {
            AttackEvent attack;
            attack.attack_id = row.at("attack_id").get<std::string>();
            attack.covertness = covertness_from_string(row.at("covertness").get<std::string>());
            attack.naive = row.value("naive", false);
            for (const auto& s : row.at("steps")) {
                AttackStep step;
                step.tag = step_tag_from_string(s.at("type").get<std::string>());
                // window in ms ("t0"/"t1") or seconds ("t0_s"/"t1_s")
                if (s.contains("t0")) {
                    step.t0 = s.at("t0").get<SimTime>();
                    step.t1 = s.at("t1").get<SimTime>();
                } else {
                    step.t0 = static_cast<SimTime>(
                        std::llround(s.at("t0_s").get<double>() * 1000.0));
                    step.t1 = static_cast<SimTime>(
                        std::llround(s.at("t1_s").get<double>() * 1000.0));
                }
                attack.steps.push_back(step);
            }
            schedule.push_back(std::move(attack));
        }
    } catch (const json::exception& e) {
        throw ValidationError(source_name + ": " + e.what());
    }
    return schedule;
}

}  // namespace rangeforge::netrange
