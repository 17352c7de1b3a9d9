#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rangeforge/digest.hpp"
#include "rangeforge/error.hpp"
#include "rangeforge/netrange.hpp"
#include "rangeforge/rng.hpp"

using namespace rangeforge;
using namespace rangeforge::netrange;

namespace {

NetConfig small_config(SimTime duration = seconds(240)) {
    NetConfig cfg;
    cfg.duration = duration;
    cfg.background_rate_gbps = 1.25;
    cfg.background_hosts = 400;
    cfg.emulated_hosts = 100;
    cfg.training_fraction = 0.2;
    cfg.seed = 12;
    return cfg;
}

AttackEvent campaign(const std::string& id, Covertness cov, bool naive, SimTime t0) {
    AttackEvent attack;
    attack.attack_id = id;
    attack.covertness = cov;
    attack.naive = naive;
    attack.steps = {{StepTag::Reconnaissance, t0, t0 + seconds(20)},
                    {StepTag::Exploitation, t0 + seconds(25), t0 + seconds(45)},
                    {StepTag::Exfiltration, t0 + seconds(50), t0 + seconds(70)}};
    return attack;
}

/// Two-sample KS statistic over byte sizes.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0;
    std::size_t k = 0;
    while (i < a.size() && k < b.size()) {
        if (a[i] <= b[k]) {
            ++i;
        } else {
            ++k;
        }
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(k) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace

TEST_CASE("build_timeline: sliding 60s windows hold the 1.25 Gbps mean within 10%") {
    auto timeline = build_timeline(small_config());
    auto [lo, hi] = sliding_rate_extrema(timeline, seconds(60));
    CHECK(lo >= 1.25 * 0.9);
    CHECK(hi <= 1.25 * 1.1);
}

TEST_CASE("build_timeline: no attacks and no emulated hosts is pure background") {
    NetConfig cfg = small_config(seconds(60));
    cfg.emulated_hosts = 0;
    auto timeline = build_timeline(cfg);
    CHECK(timeline.emulated.empty());
    for (const auto& seg : timeline.segments) {
        CHECK(seg.truth.kind == GroundTruth::Kind::Background);
    }
}

TEST_CASE("build_timeline: emulated and background segment sizes are indistinguishable") {
    auto timeline = build_timeline(small_config(seconds(300)));
    std::vector<double> emulated_sizes;
    std::vector<double> background_sizes;
    for (const auto& seg : timeline.segments) {
        if (seg.truth.kind == GroundTruth::Kind::EmulatedBenign) {
            emulated_sizes.push_back(static_cast<double>(seg.bytes));
        } else if (seg.truth.kind == GroundTruth::Kind::Background) {
            background_sizes.push_back(static_cast<double>(seg.bytes));
        }
    }
    REQUIRE(emulated_sizes.size() > 500);
    REQUIRE(background_sizes.size() > 500);
    const double d = ks_statistic(emulated_sizes, background_sizes);
    const double n = static_cast<double>(emulated_sizes.size());
    const double m = static_cast<double>(background_sizes.size());
    const double threshold = 1.628 * std::sqrt((n + m) / (n * m));  // alpha = 0.01
    CHECK(d < threshold);
}

TEST_CASE("build_timeline: deterministic under the seed") {
    NetConfig cfg = small_config(seconds(200));
    cfg.schedule = {campaign("c1", Covertness::Overt, false, seconds(60))};
    auto a = build_timeline(cfg);
    auto b = build_timeline(cfg);
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
        CHECK(device_line(a.segments[i]) == device_line(b.segments[i]));
    }
}

TEST_CASE("build_timeline: training prefix stays attack-free; overflow rejected") {
    NetConfig cfg = small_config(seconds(120));
    cfg.schedule = {campaign("early", Covertness::Overt, false, seconds(10))};
    CHECK_THROWS_WITH_AS(build_timeline(cfg), doctest::Contains("training"),
                         ValidationError);

    cfg.schedule = {campaign("late", Covertness::Overt, false, seconds(100))};
    CHECK_THROWS_WITH_AS(build_timeline(cfg), doctest::Contains("duration"),
                         ValidationError);

    cfg.schedule = {campaign("ok", Covertness::Overt, false, seconds(40))};
    auto timeline = build_timeline(cfg);
    for (const auto& seg : timeline.segments) {
        if (seg.truth.kind == GroundTruth::Kind::Attack) {
            CHECK(seg.t_start >= timeline.training_end);
        }
    }
}

TEST_CASE("address spread: emulated hosts never sit adjacent in the space") {
    for (std::uint64_t seed : {1ull, 7ull, 42ull}) {
        NetConfig cfg = small_config(seconds(10));
        cfg.seed = seed;
        auto timeline = build_timeline(cfg);
        CHECK(timeline.emulated.size() == 100);

        std::set<std::string> emulated(timeline.emulated.begin(), timeline.emulated.end());
        int longest_run = 0;
        int run = 0;
        for (const auto& addr : timeline.addresses) {
            run = emulated.count(addr) != 0 ? run + 1 : 0;
            longest_run = std::max(longest_run, run);
        }
        CHECK(longest_run >= 1);
        CHECK(longest_run <= cfg.max_emulated_run);
        CHECK(longest_run == 1);  // jittered stride keeps a gap of two
    }
}

TEST_CASE("surge: factor 4 takes the in-window mean to 5 Gbps, out-of-window untouched") {
    NetConfig cfg = small_config(seconds(300));
    cfg.schedule = {campaign("c1", Covertness::Moderate, false, seconds(80))};
    auto base = build_timeline(cfg);
    const SimTime w0 = seconds(120);
    const SimTime w1 = seconds(240);
    auto surged = surge(base, 4.0, w0, w1);

    const double in_window = window_rate_gbps(surged, w0, w1);
    CHECK(in_window >= 5.0 * 0.9);
    CHECK(in_window <= 5.0 * 1.1);

    // integer factors replicate in-window benign bytes exactly; attack bytes
    // are untouched
    auto window_bytes = [&](const TrafficTimeline& t, bool attack) {
        std::int64_t total = 0;
        for (const auto& seg : t.segments) {
            if (seg.t_start < w0 || seg.t_start >= w1) continue;
            if ((seg.truth.kind == GroundTruth::Kind::Attack) == attack) total += seg.bytes;
        }
        return total;
    };
    CHECK(window_bytes(surged, false) == 4 * window_bytes(base, false));
    CHECK(window_bytes(surged, true) == window_bytes(base, true));

    // out-of-window traffic byte-identical
    auto out_bytes = [&](const TrafficTimeline& t) {
        std::int64_t total = 0;
        for (const auto& seg : t.segments) {
            if (seg.t_start < w0 || seg.t_start >= w1) total += seg.bytes;
        }
        return total;
    };
    CHECK(out_bytes(surged) == out_bytes(base));

    auto attack_count = [](const TrafficTimeline& t) {
        return std::count_if(t.segments.begin(), t.segments.end(), [](const auto& seg) {
            return seg.truth.kind == GroundTruth::Kind::Attack;
        });
    };
    CHECK(attack_count(surged) == attack_count(base));
}

TEST_CASE("surge: factor 1 is the identity") {
    auto base = build_timeline(small_config(seconds(60)));
    auto same = surge(base, 1.0, seconds(10), seconds(50));
    REQUIRE(same.segments.size() == base.segments.size());
    for (std::size_t i = 0; i < base.segments.size(); ++i) {
        CHECK(device_line(same.segments[i]) == device_line(base.segments[i]));
    }
}

TEST_CASE("fanout: digests agree for one through eight devices") {
    auto timeline = build_timeline(small_config(seconds(30)));
    for (int n = 1; n <= 8; ++n) {
        std::vector<std::string> devices;
        for (int i = 0; i < n; ++i) devices.push_back("dev-" + std::to_string(i));
        auto streams = fanout(timeline, devices);
        REQUIRE(static_cast<int>(streams.size()) == n);
        for (const auto& s : streams) {
            CHECK(s.digest == streams.front().digest);
            CHECK(s.lines == timeline.segments.size());
        }
    }
    CHECK_THROWS_AS(fanout(timeline, {}), ValidationError);
}

TEST_CASE("fanout: single-device digest equals the direct serialization digest") {
    auto timeline = build_timeline(small_config(seconds(20)));
    Sha256 direct;
    for (const auto& seg : timeline.segments) {
        direct.update(device_line(seg));
        direct.update("\n");
    }
    auto streams = fanout(timeline, {"only"});
    CHECK(streams[0].digest == direct.hex_digest());
}

TEST_CASE("label hygiene: the device stream leaks no ground-truth tokens") {
    NetConfig cfg = small_config(seconds(150));
    cfg.schedule = {campaign("campaign-zulu", Covertness::Covert, true, seconds(40))};
    auto timeline = build_timeline(cfg);

    std::string stream;
    fanout(timeline, {"dev"}, [&](const std::string&, const std::string& line) {
        stream += line;
        stream += '\n';
    });
    for (const char* token :
         {"ground_truth", "truth", "attack", "background", "emulated", "benign",
          "malicious", "recon", "exploit", "lateral", "command_and_control", "exfil",
          "covert", "naive", "zulu", "label", "step", "training"}) {
        CAPTURE(token);
        CHECK(stream.find(token) == std::string::npos);
    }
    // the stream still carries the real schema keys
    CHECK(stream.find("\"t_start\"") != std::string::npos);
    CHECK(stream.find("\"bytes\"") != std::string::npos);
}

TEST_CASE("score_detections: an in-window alert with a matching type is one TP") {
    std::vector<AttackEvent> schedule = {campaign("c1", Covertness::Overt, false, seconds(60))};
    std::map<std::string, std::vector<DeviceAlert>> alerts;
    alerts["dev"] = {{"dev", seconds(70), StepTag::Reconnaissance, {}}};
    auto scores = score_detections(alerts, schedule, seconds(60), {"dev"});
    REQUIRE(scores.size() == 1);
    CHECK(scores[0].tp == 1);
    CHECK(scores[0].fp == 0);
    CHECK(scores[0].fn == 2);  // the other two steps went unalerted
    CHECK(scores[0].campaigns[0].steps_detected == 1);
    CHECK(scores[0].campaigns[0].steps_total == 3);
}

TEST_CASE("score_detections: silence is all false negatives and zero false positives") {
    std::vector<AttackEvent> schedule = {
        campaign("c1", Covertness::Overt, false, seconds(60)),
        campaign("c2", Covertness::Covert, true, seconds(140))};
    std::map<std::string, std::vector<DeviceAlert>> alerts;
    auto scores = score_detections(alerts, schedule, seconds(60), {"dev"});
    CHECK(scores[0].tp == 0);
    CHECK(scores[0].fp == 0);
    CHECK(scores[0].fn == 6);
    CHECK(scores[0].naive.fn == 3);
    CHECK(scores[0].seen.fn == 3);
    CHECK(scores[0].by_covertness.at("covert").fn == 3);
}

TEST_CASE("score_detections: unknown device is rejected") {
    std::vector<AttackEvent> schedule = {campaign("c1", Covertness::Overt, false, seconds(60))};
    std::map<std::string, std::vector<DeviceAlert>> alerts;
    alerts["ghost"] = {};
    CHECK_THROWS_AS(score_detections(alerts, schedule, seconds(60), {"dev"}),
                    ValidationError);
}

TEST_CASE("score_detections: matches a brute-force matcher over randomized schedules") {
    Rng rng(606);
    for (int round = 0; round < 30; ++round) {
        // random schedule of up to 20 steps
        std::vector<AttackEvent> schedule;
        const int campaigns = 1 + static_cast<int>(rng.below(4));
        for (int c = 0; c < campaigns; ++c) {
            AttackEvent attack;
            attack.attack_id = "c" + std::to_string(c);
            attack.covertness = static_cast<Covertness>(rng.below(3));
            attack.naive = rng.bernoulli(0.5);
            SimTime cursor = seconds(60 + rng.below(60));
            const int steps = 1 + static_cast<int>(rng.below(5));
            for (int s = 0; s < steps; ++s) {
                AttackStep step;
                step.tag = static_cast<StepTag>(rng.below(5));
                step.t0 = cursor;
                step.t1 = cursor + seconds(10 + rng.below(30));
                cursor = step.t1 + seconds(rng.below(20));
                attack.steps.push_back(step);
            }
            schedule.push_back(attack);
        }
        // random alerts around the schedule
        std::map<std::string, std::vector<DeviceAlert>> alerts;
        auto& list = alerts["dev"];
        const int n_alerts = static_cast<int>(rng.below(25));
        for (int a = 0; a < n_alerts; ++a) {
            DeviceAlert alert;
            alert.device_id = "dev";
            alert.t_alert = seconds(rng.below(600));
            alert.claimed_type = static_cast<StepTag>(rng.below(5));
            list.push_back(alert);
        }
        const SimTime slack = seconds(rng.below(90));

        auto scores = score_detections(alerts, schedule, slack, {"dev"});

        // brute force: nested loops, no early structure
        std::int64_t tp = 0;
        std::int64_t fp = 0;
        std::vector<std::pair<std::string, std::size_t>> hit;
        for (const auto& alert : list) {
            const AttackEvent* best_attack = nullptr;
            std::size_t best_step = 0;
            for (const auto& attack : schedule) {
                for (std::size_t s = 0; s < attack.steps.size(); ++s) {
                    const auto& step = attack.steps[s];
                    if (step.tag != alert.claimed_type) continue;
                    if (alert.t_alert < step.t0 - slack || alert.t_alert > step.t1 + slack) {
                        continue;
                    }
                    const bool better =
                        best_attack == nullptr || step.t0 < best_attack->steps[best_step].t0 ||
                        (step.t0 == best_attack->steps[best_step].t0 &&
                         (attack.attack_id < best_attack->attack_id ||
                          (attack.attack_id == best_attack->attack_id && s < best_step)));
                    if (better) {
                        best_attack = &attack;
                        best_step = s;
                    }
                }
            }
            if (best_attack == nullptr) {
                ++fp;
            } else {
                ++tp;
                hit.emplace_back(best_attack->attack_id, best_step);
            }
        }
        std::int64_t fn = 0;
        for (const auto& attack : schedule) {
            for (std::size_t s = 0; s < attack.steps.size(); ++s) {
                if (std::find(hit.begin(), hit.end(),
                              std::make_pair(attack.attack_id, s)) == hit.end()) {
                    ++fn;
                }
            }
        }
        CAPTURE(round);
        CHECK(scores[0].tp == tp);
        CHECK(scores[0].fp == fp);
        CHECK(scores[0].fn == fn);
    }
}

TEST_CASE("alerts jsonl round-trip") {
    DeviceAlert alert{"dev", seconds(120), StepTag::Exfiltration, {"10.0.1.2"}};
    std::istringstream in(alert_to_json_line(alert) + "\n");
    auto back = alerts_from_jsonl(in, "inline", "dev");
    REQUIRE(back.size() == 1);
    CHECK(back[0].t_alert == alert.t_alert);
    CHECK(back[0].claimed_type == alert.claimed_type);
    CHECK(back[0].claimed_addresses == alert.claimed_addresses);
}

TEST_CASE("schedule json round-trip") {
    std::vector<AttackEvent> schedule = {campaign("c9", Covertness::Moderate, true,
                                                  seconds(90))};
    auto text = schedule_to_json_text(schedule);
    auto back = schedule_from_json_text(text, "inline");
    REQUIRE(back.size() == 1);
    CHECK(back[0].attack_id == "c9");
    CHECK(back[0].covertness == Covertness::Moderate);
    CHECK(back[0].naive);
    REQUIRE(back[0].steps.size() == 3);
    CHECK(back[0].steps[2].tag == StepTag::Exfiltration);
}
