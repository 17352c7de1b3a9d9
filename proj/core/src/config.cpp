#include "rangeforge/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rangeforge/detector.hpp"
#include "rangeforge/digest.hpp"
#include "rangeforge/error.hpp"

namespace rangeforge::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ValidationError(path + ": invalid JSON");
    if (!doc.is_object()) throw ValidationError(path + ": config must be a JSON object");
    return doc;
}

std::string sibling(const std::string& config_path, const std::string& ref) {
    fs::path p(ref);
    if (p.is_absolute()) return ref;
    return (fs::path(config_path).parent_path() / p).string();
}

SimTime seconds_field(const json& obj, const char* key, SimTime fallback) {
    if (!obj.contains(key)) return fallback;
    return static_cast<SimTime>(std::llround(obj.at(key).get<double>() * 1000.0));
}

lifecycle::StageTimings timings_from(const json& doc) {
    lifecycle::StageTimings t;
    if (!doc.contains("timings")) return t;
    const json& obj = doc.at("timings");
    t.boot = seconds_field(obj, "boot_s", t.boot);
    t.static_timeout = seconds_field(obj, "static_timeout_s", t.static_timeout);
    t.dynamic_timeout = seconds_field(obj, "dynamic_timeout_s", t.dynamic_timeout);
    t.collect = seconds_field(obj, "collect_s", t.collect);
    t.revert = seconds_field(obj, "revert_s", t.revert);
    t.validate();
    return t;
}

scheduler::Limits limits_from(const json& doc) {
    scheduler::Limits limits;
    if (!doc.contains("limits")) return limits;
    const json& obj = doc.at("limits");
    limits.max_api_connections = obj.value("max_api_connections", limits.max_api_connections);
    limits.max_concurrent_tasks = obj.value("max_concurrent_tasks", limits.max_concurrent_tasks);
    limits.max_concurrent_vms = obj.value("max_concurrent_vms", limits.max_concurrent_vms);
    limits.max_attempts = obj.value("max_attempts", limits.max_attempts);
    limits.validate();
    return limits;
}

std::vector<cluster::PhysicalNodeSpec> topology_from(const json& doc,
                                                     const std::string& config_path) {
    if (!doc.contains("topology")) {
        throw ValidationError(config_path + ": missing 'topology'");
    }
    const json& obj = doc.at("topology");
    if (obj.contains("path")) {
        return cluster::load_topology(sibling(config_path, obj.at("path").get<std::string>()));
    }
    if (obj.contains("poweredge")) {
        const json& pe = obj.at("poweredge");
        return cluster::poweredge_profile(pe.value("r740", 8), pe.value("r840", 8),
                                          pe.value("vm_capacity_per_controller", 50));
    }
    throw ValidationError(config_path + ": topology needs 'path' or 'poweredge'");
}

corpus::TypeDistribution distribution_from(const json& obj) {
    corpus::TypeDistribution dist;
    for (auto& [k, v] : obj.items()) dist.weights[k] = v.get<double>();
    dist.validate();
    return dist;
}

scheduler::RunParams params_from_doc(const json& doc) {
    scheduler::RunParams params;
    params.seed = doc.value("seed", 0ull);
    params.limits = limits_from(doc);
    params.timings = timings_from(doc);

    if (doc.contains("deploy")) {
        const json& dep = doc.at("deploy");
        params.deploy_mode =
            cluster::deploy_mode_from_string(dep.value("mode", "fast_clone"));
        auto& dt = params.deploy_timings;
        if (dep.contains("full")) {
            dt.full_seed_copy = seconds_field(dep.at("full"), "seed_copy_s", dt.full_seed_copy);
            dt.full_clone = seconds_field(dep.at("full"), "clone_s", dt.full_clone);
        }
        if (dep.contains("fast")) {
            dt.fast_seed_copy = seconds_field(dep.at("fast"), "seed_copy_s", dt.fast_seed_copy);
            dt.fast_clone = seconds_field(dep.at("fast"), "clone_s", dt.fast_clone);
        }
        params.teardown_duration = seconds_field(dep, "teardown_s", params.teardown_duration);
    }

    if (doc.contains("phases")) {
        params.phases.clear();
        for (const auto& p : doc.at("phases")) {
            params.phases.push_back(scheduler::phase_from_string(p.get<std::string>()));
        }
    }
    params.qa_subset = doc.value("qa_subset", params.qa_subset);
    params.qa_crash_loop_threshold =
        doc.value("qa_crash_loop_threshold", params.qa_crash_loop_threshold);
    params.early_exit = doc.value("early_exit", params.early_exit);
    params.validate();
    return params;
}

}  // namespace

std::string config_mode(const std::string& path) {
    return load_json_file(path).value("mode", "endpoint");
}

scheduler::RunParams run_params_from_config_text(const std::string& text,
                                                 const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError(source_name + ": invalid config JSON");
    }
    return params_from_doc(doc);
}

scoring::CostParams cost_params_from_config_text(const std::string& text,
                                                 const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError(source_name + ": invalid config JSON");
    }
    if (!doc.contains("cost")) return scoring::CostParams{};
    return scoring::cost_params_from_json_text(doc.at("cost").dump(), source_name);
}

ResolvedRun load_run_config(const std::string& path,
                            std::optional<std::uint64_t> seed_override) {
    json doc = load_json_file(path);
    if (doc.value("mode", "endpoint") != "endpoint") {
        throw ValidationError(path + ": not an endpoint-challenge config");
    }
    if (seed_override) doc["seed"] = *seed_override;

    ResolvedRun resolved;
    resolved.inputs.params = params_from_doc(doc);
    scheduler::RunParams& params = resolved.inputs.params;

    resolved.inputs.topology = topology_from(doc, path);
    resolved.topology_json = cluster::topology_to_json_text(resolved.inputs.topology);
    resolved.inputs.input_digests["topology"] = Sha256::of(resolved.topology_json);

    // --- corpus -----------------------------------------------------------
    if (!doc.contains("corpus")) throw ValidationError(path + ": missing 'corpus'");
    const json& corp = doc.at("corpus");

    corpus::CorpusManifest manifest;
    std::vector<corpus::SampleRecord> zero_day_pool;
    const json& source = corp.contains("manifest") ? corp.at("manifest") : json::object();
    if (source.contains("path")) {
        const std::string manifest_path =
            sibling(path, source.at("path").get<std::string>());
        manifest = corpus::load_manifest(manifest_path);
        resolved.inputs.input_digests["manifest"] = sha256_file(manifest_path);
    } else if (source.contains("synthetic")) {
        const json& synth = source.at("synthetic");
        corpus::SyntheticSpec spec;
        spec.records = synth.at("records").get<std::size_t>();
        spec.benign_fraction = synth.value("benign_fraction", 0.5);
        spec.zero_days = synth.value("zero_days", 0ull);
        if (synth.contains("type_weights")) {
            spec.type_weights = distribution_from(synth.at("type_weights"));
        }
        spec.seed = params.seed;
        auto built = corpus::synthesize(spec);
        manifest = std::move(built.manifest);
        zero_day_pool = std::move(built.zero_days);
        resolved.inputs.input_digests["manifest"] = Sha256::of("synthetic:" + synth.dump());
    } else {
        throw ValidationError(path + ": corpus.manifest needs 'path' or 'synthetic'");
    }

    const auto n_total = corp.value("n_total", manifest.records.size());
    const double fraction = corp.value("benign_fraction", 0.5);
    std::optional<corpus::TypeDistribution> target;
    if (corp.contains("target") && corp.at("target").is_object()) {
        target = distribution_from(corp.at("target"));
    }
    resolved.inputs.set =
        corpus::stratified_sample(manifest, n_total, fraction, target, params.seed);

    if (corp.contains("zero_days")) {
        const json& zd = corp.at("zero_days");
        const auto count = zd.value("count", 0ull);
        if (zd.contains("path")) {
            const std::string zd_path = sibling(path, zd.at("path").get<std::string>());
            auto pool = corpus::load_manifest(zd_path).records;
            zero_day_pool = std::move(pool);
            resolved.inputs.input_digests["zero_days"] = sha256_file(zd_path);
        }
        if (count > zero_day_pool.size()) {
            throw ValidationError(path + ": zero_days.count exceeds the available pool (" +
                                  std::to_string(zero_day_pool.size()) + ")");
        }
        zero_day_pool.resize(count);
        resolved.inputs.set = corpus::inject_zero_days(resolved.inputs.set, zero_day_pool);
    }

    // --- detector -----------------------------------------------------------
    if (!doc.contains("detector")) throw ValidationError(path + ": missing 'detector'");
    const json& det = doc.at("detector");
    if (det.contains("preset")) {
        resolved.inputs.model = detector::preset(det.at("preset").get<std::string>());
    } else if (det.contains("path")) {
        resolved.inputs.model =
            detector::load_model(sibling(path, det.at("path").get<std::string>()));
    } else {
        throw ValidationError(path + ": detector needs 'preset' or 'path'");
    }
    resolved.inputs.model.validate(params.timings);
    resolved.detector_name = resolved.inputs.model.name;
    resolved.detector_json = detector::model_to_json_text(resolved.inputs.model);
    resolved.inputs.input_digests["detector"] = Sha256::of(resolved.detector_json);

    if (doc.contains("cost")) {
        resolved.cost = scoring::cost_params_from_json_text(doc.at("cost").dump(), path);
    }

    resolved.config_json = doc.dump(2) + "\n";
    resolved.inputs.config_digest = Sha256::of(resolved.config_json);
    return resolved;
}

ResolvedNet load_net_config(const std::string& path,
                            std::optional<std::uint64_t> seed_override) {
    json doc = load_json_file(path);
    if (doc.value("mode", "") != "network") {
        throw ValidationError(path + ": not a network-challenge config");
    }
    if (seed_override) doc["seed"] = *seed_override;

    ResolvedNet resolved;
    resolved.seed = doc.value("seed", 0ull);

    netrange::NetConfig& net = resolved.net;
    net.seed = resolved.seed;
    if (doc.contains("net")) {
        const json& obj = doc.at("net");
        net.duration = seconds_field(obj, "duration_s", net.duration);
        net.background_rate_gbps = obj.value("background_rate_gbps", net.background_rate_gbps);
        net.background_hosts = obj.value("background_hosts", net.background_hosts);
        net.emulated_hosts = obj.value("emulated_hosts", net.emulated_hosts);
        net.training_fraction = obj.value("training_fraction", net.training_fraction);
        net.max_emulated_run = obj.value("max_emulated_run", net.max_emulated_run);
    }

    if (doc.contains("attacks")) {
        net.schedule = netrange::schedule_from_json_text(doc.at("attacks").dump(), path);
    }
    net.validate();

    if (!doc.contains("devices") || doc.at("devices").empty()) {
        throw ValidationError(path + ": network config needs a nonempty 'devices' list");
    }
    for (const auto& d : doc.at("devices")) resolved.devices.push_back(d.get<std::string>());

    for (const auto& s : doc.value("surges", json::array())) {
        SurgeSpec spec;
        spec.factor = s.at("factor").get<double>();
        spec.t0 = seconds_field(s, "t0_s", 0);
        spec.t1 = seconds_field(s, "t1_s", 0);
        if (spec.factor <= 0.0 || spec.t0 >= spec.t1 || spec.t1 > net.duration) {
            throw ValidationError(path + ": bad surge window");
        }
        resolved.surges.push_back(spec);
    }

    resolved.match_slack = seconds_field(doc, "match_slack_s", resolved.match_slack);
    if (resolved.match_slack < 0) throw ValidationError(path + ": negative match slack");

    resolved.config_json = doc.dump(2) + "\n";
    resolved.config_digest = Sha256::of(resolved.config_json);
    return resolved;
}

}  // namespace rangeforge::config
