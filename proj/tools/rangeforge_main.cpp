#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rangeforge/config.hpp"
#include "rangeforge/corpus.hpp"
#include "rangeforge/detector.hpp"
#include "rangeforge/digest.hpp"
#include "rangeforge/error.hpp"
#include "rangeforge/journal.hpp"
#include "rangeforge/netrange.hpp"
#include "rangeforge/scheduler.hpp"
#include "rangeforge/scoring.hpp"
#include "rangeforge/version.hpp"

#include "feed_socket.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rangeforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitQaNoGo = 3;

std::string output_root(const std::string& out_flag) {
    if (!out_flag.empty()) return out_flag;
    if (const char* env = std::getenv("RANGEFORGE_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return ".";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Reruns never touch an existing run directory; each invocation claims the
/// next free id under <root>/runs/.
std::string make_run_id(const fs::path& runs_dir, const std::string& config_digest) {
    const std::string prefix = config_digest.substr(0, 8);
    for (int i = 1; i < 100000; ++i) {
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "-%03d", i);
        const std::string candidate = prefix + suffix;
        if (!fs::exists(runs_dir / candidate)) return candidate;
    }
    throw Error("run id space exhausted under " + runs_dir.string());
}

struct RunDirRefs {
    fs::path dir;
    journal::RunJournal journal;
    std::string config_json;
};

RunDirRefs open_run_dir(const std::string& run_dir) {
    RunDirRefs refs;
    refs.dir = run_dir;
    refs.journal = journal::RunJournal::load_file((refs.dir / "journal.jsonl").string());
    refs.config_json = read_file(refs.dir / "inputs" / "config.json");
    return refs;
}

int cmd_corpus_sample(const std::string& manifest_path, std::size_t n, double fraction,
                      std::uint64_t seed, const std::string& out_path,
                      const std::string& zero_days_path, std::size_t inject_count) {
    auto manifest = corpus::load_manifest(manifest_path);
    auto set = corpus::stratified_sample(manifest, n, fraction, std::nullopt, seed);
    if (!zero_days_path.empty()) {
        auto pool = corpus::load_manifest(zero_days_path).records;
        if (inject_count > 0 && inject_count < pool.size()) pool.resize(inject_count);
        set = corpus::inject_zero_days(set, pool);
    }
    const std::string body = corpus::to_jsonl(set);
    if (out_path.empty() || out_path == "-") {
        std::cout << body;
    } else {
        write_file(out_path, body);
    }
    std::cerr << "sampled " << set.samples.size() << " records (benign "
              << set.count_label(corpus::Label::Benign) << ", malicious "
              << set.count_label(corpus::Label::Malicious) << ")\n";
    return kExitOk;
}

int cmd_validate(const std::string& config_path, std::optional<std::uint64_t> seed) {
    const std::string mode = config::config_mode(config_path);
    if (mode == "network") {
        auto resolved = config::load_net_config(config_path, seed);
        std::cerr << "ok: network config, " << resolved.devices.size() << " devices, "
                  << resolved.net.schedule.size() << " campaigns\n";
    } else {
        auto resolved = config::load_run_config(config_path, seed);
        std::cerr << "ok: endpoint config, " << resolved.inputs.set.samples.size()
                  << " samples, detector '" << resolved.detector_name << "'\n";
    }
    return kExitOk;
}

void write_endpoint_inputs(const fs::path& dir, const config::ResolvedRun& resolved) {
    fs::create_directories(dir / "inputs");
    write_file(dir / "inputs" / "config.json", resolved.config_json);
    write_file(dir / "inputs" / "topology.json", resolved.topology_json);
    write_file(dir / "inputs" / "detector.json", resolved.detector_json);
    write_file(dir / "inputs" / "sample_set.jsonl", corpus::to_jsonl(resolved.inputs.set));
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_flag, const std::string& format,
            const std::string& feed_path) {
    auto resolved = config::load_run_config(config_path, seed);

    const fs::path runs_dir = fs::path(output_root(out_flag)) / "runs";
    fs::create_directories(runs_dir);
    const std::string run_id = make_run_id(runs_dir, resolved.inputs.config_digest);
    const fs::path dir = runs_dir / run_id;
    write_endpoint_inputs(dir, resolved);

    std::unique_ptr<tools::FeedSocket> feed;
    if (!feed_path.empty()) feed = std::make_unique<tools::FeedSocket>(feed_path);

    std::uint64_t event_count = 0;
    auto observer = [&](const journal::JournalEvent& ev) {
        ++event_count;
        if (feed) feed->write_line(journal::to_json_line(ev));
        if (event_count % 200000 == 0) {
            std::cerr << "… " << event_count << " events, sim " << format_duration(ev.sim_time)
                      << "\n";
        }
    };

    auto run_journal = scheduler::run_challenge(resolved.inputs, observer);
    run_journal.write_file((dir / "journal.jsonl").string());

    auto counts = scoring::tally(run_journal, resolved.inputs.set);
    auto report = scoring::cost_score(counts, run_journal, resolved.cost);
    report.tool = resolved.detector_name;
    write_file(dir / "report.json", report.to_json_text() + "\n");

    const auto spans = scheduler::phase_spans(run_journal);
    const auto run_span = spans.count("run") ? spans.at("run") : scheduler::PhaseSpan{};
    if (format == "table") {
        std::cout << "run " << run_id << "\n  digest " << run_journal.digest()
                  << "\n  simulated " << format_duration(run_span.end - run_span.start)
                  << "\n  events " << run_journal.events().size() << "\n"
                  << report.to_table();
    } else {
        json out{{"run_id", run_id},
                 {"digest", run_journal.digest()},
                 {"events", run_journal.events().size()},
                 {"sim_duration_ms", run_span.end - run_span.start},
                 {"done", run_journal.trailer().summary.at("done")},
                 {"incomplete", run_journal.trailer().summary.at("incomplete")},
                 {"total_cost", report.total}};
        std::cout << out.dump(2) << "\n";
    }
    std::cerr << "journal: " << (dir / "journal.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_qa(const std::string& config_path, std::optional<std::uint64_t> seed,
           std::size_t subset_flag, const std::string& format) {
    auto resolved = config::load_run_config(config_path, seed);
    std::size_t subset = subset_flag > 0 ? subset_flag : resolved.inputs.params.qa_subset;
    subset = std::min(subset, resolved.inputs.set.samples.size());
    const auto report = scheduler::qa_run(resolved.inputs, subset);

    if (format == "table") {
        std::cout << "qa: " << (report.go ? "go" : "no-go") << " (subset " << report.subset_size
                  << ", done " << report.done << ", incomplete " << report.incomplete
                  << ", crashes " << report.crashes << ")\n";
        for (const auto& f : report.failures) {
            std::cout << "  failure " << f.cls << ": " << f.detail << " (count " << f.count
                      << ")\n";
        }
    } else {
        std::cout << report.to_json_text() << "\n";
    }
    return report.go ? kExitOk : kExitQaNoGo;
}

int score_endpoint(const RunDirRefs& refs, const std::string& skew_path,
                   const std::string& cost_path, const std::string& format,
                   const std::string& out_path) {
    journal::RunJournal run_journal = refs.journal;
    if (!skew_path.empty()) {
        run_journal = scoring::correct_skew(run_journal, scoring::load_skew(skew_path));
    }
    const auto set =
        corpus::load_sample_set((refs.dir / "inputs" / "sample_set.jsonl").string());
    const auto cost = cost_path.empty()
                          ? config::cost_params_from_config_text(refs.config_json, "config")
                          : scoring::cost_params_from_json_text(read_file(cost_path), cost_path);
    auto counts = scoring::tally(run_journal, set);
    auto report = scoring::cost_score(counts, run_journal, cost);
    report.tool = detector::load_model((refs.dir / "inputs" / "detector.json").string()).name;

    const std::string body =
        format == "table" ? report.to_table() : report.to_json_text() + "\n";
    if (out_path.empty()) {
        std::cout << body;
    } else {
        write_file(out_path, body);
    }
    return kExitOk;
}

int score_net(const fs::path& dir, const std::string& config_json,
              const std::string& alerts_dir, std::optional<SimTime> slack_override,
              const std::string& format, const std::string& out_path) {
    json cfg = json::parse(config_json);
    std::vector<std::string> devices;
    for (const auto& d : cfg.at("devices")) devices.push_back(d.get<std::string>());
    const SimTime slack = slack_override
                              ? *slack_override
                              : static_cast<SimTime>(
                                    std::llround(cfg.value("match_slack_s", 60.0) * 1000.0));

    const json truth = json::parse(read_file(dir / "ground_truth.json"));
    const auto schedule =
        netrange::schedule_from_json_text(truth.at("schedule").dump(), "ground_truth.json");

    std::map<std::string, std::vector<netrange::DeviceAlert>> alerts;
    const fs::path base = alerts_dir.empty() ? dir / "alerts" : fs::path(alerts_dir);
    for (const auto& device : devices) {
        const fs::path file = base / (device + ".jsonl");
        if (fs::exists(file)) {
            alerts[device] = netrange::load_alerts(file.string(), device);
        } else {
            std::cerr << "no alert channel for " << device << " (" << file.string() << ")\n";
        }
    }

    const auto scores = netrange::score_detections(alerts, schedule, slack, devices);
    std::ostringstream body;
    if (format == "table") {
        for (const auto& s : scores) {
            body << s.device_id << ": tp " << s.tp << " fp " << s.fp << " fn " << s.fn << "\n";
        }
    } else {
        body << "[\n";
        for (std::size_t i = 0; i < scores.size(); ++i) {
            body << scores[i].to_json_text() << (i + 1 < scores.size() ? "," : "") << "\n";
        }
        body << "]\n";
    }
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        write_file(out_path, body.str());
    }
    return kExitOk;
}

int cmd_score(const std::string& run_dir, const std::string& skew_path,
              const std::string& cost_path, const std::string& alerts_dir,
              double slack_s, const std::string& format, const std::string& out_path) {
    const fs::path dir(run_dir);
    if (fs::exists(dir / "ground_truth.json")) {
        std::optional<SimTime> slack;
        if (slack_s >= 0) slack = static_cast<SimTime>(std::llround(slack_s * 1000.0));
        return score_net(dir, read_file(dir / "inputs" / "config.json"), alerts_dir, slack,
                         format, out_path);
    }
    return score_endpoint(open_run_dir(run_dir), skew_path, cost_path, format, out_path);
}

int cmd_net_run(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::string& out_flag, const std::string& format) {
    auto resolved = config::load_net_config(config_path, seed);

    auto timeline = netrange::build_timeline(resolved.net);
    for (const auto& surge_spec : resolved.surges) {
        timeline = netrange::surge(timeline, surge_spec.factor, surge_spec.t0, surge_spec.t1);
    }

    const fs::path runs_dir = fs::path(output_root(out_flag)) / "runs";
    fs::create_directories(runs_dir);
    const std::string run_id = make_run_id(runs_dir, resolved.config_digest);
    const fs::path dir = runs_dir / run_id;
    fs::create_directories(dir / "inputs");
    fs::create_directories(dir / "streams");
    write_file(dir / "inputs" / "config.json", resolved.config_json);

    std::map<std::string, std::unique_ptr<std::ofstream>> files;
    for (const auto& device : resolved.devices) {
        files[device] = std::make_unique<std::ofstream>(dir / "streams" / (device + ".jsonl"),
                                                        std::ios::binary | std::ios::trunc);
    }
    auto sink = [&](const std::string& device, const std::string& line) {
        *files[device] << line << '\n';
    };
    const auto streams = netrange::fanout(timeline, resolved.devices, sink);
    files.clear();  // flush

    json truth{{"training_end", timeline.training_end},
               {"emulated", timeline.emulated},
               {"schedule", json::parse(netrange::schedule_to_json_text(timeline.schedule))}};
    write_file(dir / "ground_truth.json", truth.dump(2) + "\n");

    json digests = json::array();
    for (const auto& s : streams) {
        digests.push_back({{"device", s.device_id}, {"digest", s.digest}, {"lines", s.lines}});
    }
    write_file(dir / "digests.json", digests.dump(2) + "\n");

    for (const auto& s : streams) {
        if (s.digest != streams.front().digest) {
            throw Error("fan-out digests diverged across devices");
        }
    }

    if (format == "table") {
        std::cout << "net-run " << run_id << "\n  segments " << timeline.segments.size()
                  << "\n  devices " << resolved.devices.size() << "\n  stream digest "
                  << streams.front().digest << "\n";
    } else {
        json out{{"run_id", run_id},
                 {"segments", timeline.segments.size()},
                 {"devices", resolved.devices.size()},
                 {"stream_digest", streams.front().digest}};
        std::cout << out.dump(2) << "\n";
    }
    std::cerr << "streams: " << (dir / "streams").string() << "\n";
    return kExitOk;
}

int cmd_replay(const std::string& run_dir, const std::string& format) {
    auto refs = open_run_dir(run_dir);
    const auto state = journal::replay(refs.journal);
    if (state.version_mismatch) {
        std::cerr << "warning: journal written by engine version "
                  << refs.journal.header().engine_version << ", this is " << kVersion << "\n";
    }

    scheduler::RunInputs inputs;
    inputs.params = config::run_params_from_config_text(refs.config_json, "config.json");
    inputs.set = corpus::load_sample_set((refs.dir / "inputs" / "sample_set.jsonl").string());
    inputs.topology = cluster::load_topology((refs.dir / "inputs" / "topology.json").string());
    inputs.model = detector::load_model((refs.dir / "inputs" / "detector.json").string());
    inputs.config_digest = Sha256::of(refs.config_json);
    inputs.input_digests = refs.journal.header().inputs;

    const auto rerun = scheduler::run_challenge(inputs);
    const bool match = rerun.digest() == refs.journal.digest();

    if (format == "table") {
        std::cout << "replay: digest " << refs.journal.digest() << "\n  rerun  "
                  << rerun.digest() << "\n  match  " << (match ? "yes" : "NO") << "\n  done "
                  << state.done << ", incomplete " << state.incomplete << "\n";
    } else {
        json out{{"digest", refs.journal.digest()},
                 {"rerun_digest", rerun.digest()},
                 {"match", match},
                 {"done", state.done},
                 {"incomplete", state.incomplete},
                 {"events", state.events}};
        std::cout << out.dump(2) << "\n";
    }
    return match ? kExitOk : kExitRuntime;
}

int cmd_report(const std::string& run_dir, const std::string& format) {
    const fs::path dir(run_dir);
    const std::string body = read_file(dir / "report.json");
    if (format == "json") {
        std::cout << body;
        return kExitOk;
    }
    const json doc = json::parse(body);
    std::cout << "tool: " << doc.value("tool", "(unnamed)") << "\n";
    const auto& counts = doc.at("counts");
    std::cout << "  tp " << counts.at("tp") << "  fp " << counts.at("fp") << "  tn "
              << counts.at("tn") << "  fn " << counts.at("fn") << "  incomplete "
              << counts.at("incomplete") << "\n";
    const auto& rates = doc.at("rates");
    std::cout << "  tpr " << rates.at("tpr") << "  fpr " << rates.at("fpr") << "\n";
    std::cout << "  total " << doc.at("total") << " (lower is better)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rangeforge: desk-scale simulator of the AI ATAC evaluation harnesses"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path;
    std::string out_flag;
    std::string format = "json";
    std::string run_dir;
    std::string feed_path;
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        if (with_config) {
            cmd->add_option("--config", config_path, "config file")->required();
            cmd->add_option("--seed", seed, "seed override; pins every stochastic choice");
        }
        cmd->add_option("--format", format, "json|table")
            ->check(CLI::IsMember({"json", "table"}));
    };

    auto* corpus_cmd = app.add_subcommand("corpus-sample", "build a stratified sample set");
    std::string manifest_path;
    std::string zero_days_path;
    std::string corpus_out;
    std::size_t n_total = 0;
    std::size_t inject_count = 0;
    double benign_fraction = 0.5;
    std::uint64_t corpus_seed = 0;
    corpus_cmd->add_option("--manifest", manifest_path, "labeled manifest (csv or jsonl)")
        ->required();
    corpus_cmd->add_option("--n", n_total, "samples to select")->required();
    corpus_cmd->add_option("--benign-fraction", benign_fraction, "benign fraction [0,1]");
    corpus_cmd->add_option("--seed", corpus_seed, "selection seed");
    corpus_cmd->add_option("--zero-days", zero_days_path, "zero-day pool manifest");
    corpus_cmd->add_option("--inject", inject_count, "zero-days to inject (default: all)");
    corpus_cmd->add_option("--out", corpus_out, "output file (default: stdout)");

    auto* validate_cmd = app.add_subcommand("validate", "validate a config and its refs");
    add_common(validate_cmd, true);

    auto* run_cmd = app.add_subcommand("run", "execute a simulated endpoint challenge");
    add_common(run_cmd, true);
    run_cmd->add_option("--out", out_flag, "output root (default: $RANGEFORGE_OUT or .)");
    run_cmd->add_option("--feed", feed_path, "mirror events to a UNIX socket path");

    auto* qa_cmd = app.add_subcommand("qa", "QA pre-run on a representative subset");
    add_common(qa_cmd, true);
    std::size_t qa_subset = 0;
    qa_cmd->add_option("--subset", qa_subset, "subset size (default: config qa_subset)");

    auto* score_cmd = app.add_subcommand("score", "score a finished run directory");
    std::string skew_path;
    std::string cost_path;
    std::string alerts_dir;
    std::string score_out;
    double slack_s = -1.0;
    score_cmd->add_option("--run", run_dir, "run directory")->required();
    score_cmd->add_option("--skew", skew_path, "per-node clock offsets to correct");
    score_cmd->add_option("--cost", cost_path, "cost params JSON (default: run config)");
    score_cmd->add_option("--alerts", alerts_dir, "alert channel dir (network runs)");
    score_cmd->add_option("--slack-s", slack_s, "alert matching slack, seconds");
    score_cmd->add_option("--out", score_out, "write the report here instead of stdout");
    add_common(score_cmd, false);

    auto* net_cmd = app.add_subcommand("net-run", "build and fan out a network challenge");
    add_common(net_cmd, true);
    net_cmd->add_option("--out", out_flag, "output root (default: $RANGEFORGE_OUT or .)");

    auto* replay_cmd = app.add_subcommand("replay", "verify and re-execute a recorded run");
    replay_cmd->add_option("--run", run_dir, "run directory")->required();
    add_common(replay_cmd, false);

    auto* report_cmd = app.add_subcommand("report", "print a stored run report");
    report_cmd->add_option("--run", run_dir, "run directory")->required();
    add_common(report_cmd, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (corpus_cmd->parsed()) {
            return cmd_corpus_sample(manifest_path, n_total, benign_fraction, corpus_seed,
                                     corpus_out, zero_days_path, inject_count);
        }
        if (validate_cmd->parsed()) return cmd_validate(config_path, seed);
        if (run_cmd->parsed()) return cmd_run(config_path, seed, out_flag, format, feed_path);
        if (qa_cmd->parsed()) return cmd_qa(config_path, seed, qa_subset, format);
        if (score_cmd->parsed()) {
            return cmd_score(run_dir, skew_path, cost_path, alerts_dir, slack_s, format,
                             score_out);
        }
        if (net_cmd->parsed()) return cmd_net_run(config_path, seed, out_flag, format);
        if (replay_cmd->parsed()) return cmd_replay(run_dir, format);
        if (report_cmd->parsed()) return cmd_report(run_dir, format);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}
