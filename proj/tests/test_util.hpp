#pragma once

#include <string>
#include <vector>

#include "rangeforge/cluster.hpp"
#include "rangeforge/corpus.hpp"
#include "rangeforge/detector.hpp"
#include "rangeforge/scheduler.hpp"

namespace testutil {

using namespace rangeforge;

/// Manifest with `per_stratum` records for every (label, type) pair.
/// Fixed-width ids: b0000…, m0000….
inline corpus::CorpusManifest toy_manifest(
    int per_stratum, const std::vector<std::string>& types = {"executable", "document"}) {
    corpus::CorpusManifest manifest;
    int counter = 0;
    for (auto label : {corpus::Label::Benign, corpus::Label::Malicious}) {
        for (const auto& type : types) {
            for (int i = 0; i < per_stratum; ++i) {
                corpus::SampleRecord rec;
                char id[16];
                std::snprintf(id, sizeof(id), "%c%04d",
                              label == corpus::Label::Benign ? 'b' : 'm', counter++);
                rec.sample_id = id;
                rec.filetype = type;
                rec.label = label;
                rec.size_bytes = 1000 + counter;
                rec.content_digest = "d" + std::string(id);
                manifest.records.push_back(std::move(rec));
            }
        }
    }
    return manifest;
}

inline std::vector<corpus::SampleRecord> toy_zero_days(int count,
                                                       const std::string& type = "executable") {
    std::vector<corpus::SampleRecord> out;
    for (int i = 0; i < count; ++i) {
        corpus::SampleRecord rec;
        char id[16];
        std::snprintf(id, sizeof(id), "z%04d", i);
        rec.sample_id = id;
        rec.filetype = type;
        rec.label = corpus::Label::Malicious;
        rec.zero_day = true;
        rec.size_bytes = 2000 + i;
        rec.content_digest = "dz" + std::to_string(i);
        out.push_back(std::move(rec));
    }
    return out;
}

/// Millisecond-scale stage timings for sub-second toy runs.
inline lifecycle::StageTimings toy_timings(SimTime boot = 3, SimTime stat = 6,
                                           SimTime dyn = 4, SimTime collect = 2,
                                           SimTime revert = 1) {
    lifecycle::StageTimings t;
    t.boot = boot;
    t.static_timeout = stat;
    t.dynamic_timeout = dyn;
    t.collect = collect;
    t.revert = revert;
    return t;
}

/// Flat-probability detector whose latency support fits the given timings.
inline detector::DetectorModel flat_model(const lifecycle::StageTimings& timings,
                                          double static_hit, double dynamic_hit,
                                          double fp_rate, double coverage = 0.0,
                                          double crash_prob = 0.0,
                                          double egress_rate = 0.0) {
    detector::DetectorModel m;
    m.name = "test-model";
    m.signature_coverage = coverage;
    for (const auto& type : corpus::default_filetypes()) {
        m.static_hit_prob[type] = static_hit;
        m.dynamic_hit_prob[type] = dynamic_hit;
        m.false_positive_prob[type] = fp_rate;
    }
    m.static_latency = {std::min<SimTime>(1, timings.static_timeout), timings.static_timeout};
    m.dynamic_latency = {std::min<SimTime>(1, timings.dynamic_timeout),
                         std::max<SimTime>(timings.dynamic_timeout, 1)};
    if (m.dynamic_latency.hi > timings.dynamic_timeout) {
        m.dynamic_latency = {0, timings.dynamic_timeout};
    }
    m.resources = {1, 50, 10, 100};
    m.egress_rate = egress_rate;
    if (crash_prob > 0.0) m.crash_rules = {{"", crash_prob}};
    return m;
}

inline std::vector<cluster::PhysicalNodeSpec> toy_nodes(int nodes, int capacity) {
    std::vector<cluster::PhysicalNodeSpec> specs;
    for (int i = 0; i < nodes; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "n%02d", i);
        specs.push_back({id, 1, capacity, "ssd"});
    }
    return specs;
}

struct ToyOptions {
    int samples = 20;          // total, half benign
    int nodes = 2;
    int capacity = 5;
    scheduler::Limits limits{1000, 1000, 1000, 3};
    lifecycle::StageTimings timings = toy_timings();
    double static_hit = 0.4;
    double dynamic_hit = 0.4;
    double fp_rate = 0.05;
    double coverage = 0.0;
    double crash_prob = 0.0;
    double egress_rate = 0.0;
    std::uint64_t seed = 1;
    std::vector<scheduler::Phase> phases = {scheduler::Phase::Main};
};

inline scheduler::RunInputs toy_inputs(const ToyOptions& opt) {
    scheduler::RunInputs inputs;
    inputs.params.limits = opt.limits;
    inputs.params.timings = opt.timings;
    inputs.params.phases = opt.phases;
    inputs.params.seed = opt.seed;
    inputs.params.qa_subset = std::max(1, opt.samples / 2);
    inputs.topology = toy_nodes(opt.nodes, opt.capacity);
    inputs.model = flat_model(opt.timings, opt.static_hit, opt.dynamic_hit, opt.fp_rate,
                              opt.coverage, opt.crash_prob, opt.egress_rate);

    auto manifest = toy_manifest((opt.samples + 3) / 4 + 2);
    inputs.set = corpus::stratified_sample(manifest, opt.samples, 0.5, std::nullopt, opt.seed);
    inputs.config_digest = "test";
    return inputs;
}

}  // namespace testutil
