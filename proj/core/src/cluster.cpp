#include "rangeforge/cluster.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rangeforge/error.hpp"

namespace rangeforge::cluster {

using nlohmann::json;

void PhysicalNodeSpec::validate() const {
    if (node_id.empty()) throw ValidationError("node spec with empty node_id");
    if (drive_controllers < 1) {
        throw ValidationError("node '" + node_id + "': drive_controllers must be >= 1");
    }
    if (vm_capacity_per_controller < 1) {
        throw ValidationError("node '" + node_id + "': vm_capacity_per_controller must be >= 1");
    }
}

bool LogicalNode::try_acquire() {
    if (busy_slots >= vm_capacity) return false;
    ++busy_slots;
    return true;
}

void LogicalNode::release() {
    if (busy_slots <= 0) throw Error("release on idle node '" + logical_id + "'");
    --busy_slots;
}

Topology derive_logical_nodes(const std::vector<PhysicalNodeSpec>& specs) {
    if (specs.empty()) throw ValidationError("topology has no nodes");
    Topology nodes;
    for (const auto& spec : specs) {
        spec.validate();
        for (int c = 0; c < spec.drive_controllers; ++c) {
            LogicalNode node;
            node.logical_id = spec.node_id + "/" + std::to_string(c);
            node.parent = spec.node_id;
            node.vm_capacity = spec.vm_capacity_per_controller;
            nodes.push_back(std::move(node));
        }
    }
    return nodes;
}

int total_capacity(const Topology& topology) {
    int total = 0;
    for (const auto& n : topology) total += n.vm_capacity;
    return total;
}

std::string_view to_string(DeployMode mode) {
    return mode == DeployMode::FullRedeploy ? "full_redeploy" : "fast_clone";
}

DeployMode deploy_mode_from_string(std::string_view text) {
    if (text == "full_redeploy") return DeployMode::FullRedeploy;
    if (text == "fast_clone") return DeployMode::FastClone;
    throw ValidationError("unknown deploy mode: " + std::string(text));
}

void DeployTimings::validate() const {
    for (SimTime t : {full_seed_copy, full_clone, fast_seed_copy, fast_clone}) {
        if (t < 0) throw ValidationError("deploy timings must be nonnegative");
    }
}

DeploymentPlan plan_template_distribution(const Topology& topology, DeployMode mode,
                                          const DeployTimings& timings) {
    if (topology.empty()) throw ValidationError("cannot plan distribution over empty topology");
    timings.validate();

    const SimTime seed_copy =
        mode == DeployMode::FullRedeploy ? timings.full_seed_copy : timings.fast_seed_copy;
    const SimTime clone =
        mode == DeployMode::FullRedeploy ? timings.full_clone : timings.fast_clone;

    DeploymentPlan plan;
    plan.mode = mode;
    SimTime seed_total = 0;
    SimTime max_fanout = 0;
    for (const auto& node : topology) {
        plan.steps.push_back({node.logical_id, "seed_copy", 1, seed_copy});
        seed_total += seed_copy;
        const int fanout_count = std::max(0, node.vm_capacity - 1);
        const SimTime fanout = clone * fanout_count;
        plan.steps.push_back({node.logical_id, "fanout", fanout_count, fanout});
        max_fanout = std::max(max_fanout, fanout);
    }
    plan.estimated_duration = seed_total + max_fanout;
    return plan;
}

namespace {

PhysicalNodeSpec spec_from_json(const json& row) {
    PhysicalNodeSpec spec;
    spec.node_id = row.at("node_id").get<std::string>();
    spec.drive_controllers = row.value("drive_controllers", 1);
    spec.vm_capacity_per_controller = row.value("vm_capacity_per_controller", 50);
    spec.boot_storage = row.value("boot_storage", "ssd");
    spec.validate();
    return spec;
}

}  // namespace

std::vector<PhysicalNodeSpec> topology_from_json_text(const std::string& text,
                                                      const std::string& source_name) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw ValidationError(source_name + ": topology must be a JSON array of node specs");
    }
    std::vector<PhysicalNodeSpec> specs;
    try {
        for (const auto& row : doc) specs.push_back(spec_from_json(row));
    } catch (const json::exception& e) {
        throw ValidationError(source_name + ": " + e.what());
    }
    return specs;
}

std::vector<PhysicalNodeSpec> load_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open topology: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return topology_from_json_text(buf.str(), path);
}

std::string topology_to_json_text(const std::vector<PhysicalNodeSpec>& specs) {
    json doc = json::array();
    for (const auto& s : specs) {
        doc.push_back(json{{"node_id", s.node_id},
                           {"drive_controllers", s.drive_controllers},
                           {"vm_capacity_per_controller", s.vm_capacity_per_controller},
                           {"boot_storage", s.boot_storage}});
    }
    return doc.dump(2) + "\n";
}

std::vector<PhysicalNodeSpec> poweredge_profile(int r740_count, int r840_count,
                                                int vm_capacity_per_controller) {
    std::vector<PhysicalNodeSpec> specs;
    char id[32];
    for (int i = 0; i < r740_count; ++i) {
        std::snprintf(id, sizeof(id), "r740-%02d", i + 1);
        specs.push_back({id, 1, vm_capacity_per_controller, "sas"});
    }
    for (int i = 0; i < r840_count; ++i) {
        std::snprintf(id, sizeof(id), "r840-%02d", i + 1);
        specs.push_back({id, 2, vm_capacity_per_controller, "sas"});
    }
    return specs;
}

}  // namespace rangeforge::cluster
