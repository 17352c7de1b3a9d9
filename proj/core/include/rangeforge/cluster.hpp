#pragma once

#include <string>
#include <vector>

#include "rangeforge/time.hpp"

namespace rangeforge::cluster {

/// Capacity-relevant facts about a physical worker node. A node with two
/// drive controllers schedules as two independent logical nodes.
struct PhysicalNodeSpec {
    std::string node_id;
    int drive_controllers = 1;
    int vm_capacity_per_controller = 50;
    std::string boot_storage = "ssd";  // class tag, informational

    void validate() const;
};

struct LogicalNode {
    std::string logical_id;
    std::string parent;
    int vm_capacity = 0;
    int busy_slots = 0;

    /// Returns false and leaves busy_slots untouched when the node is full.
    bool try_acquire();
    void release();
};

using Topology = std::vector<LogicalNode>;

/// One logical node per drive controller; ids are "<node_id>/<controller>".
Topology derive_logical_nodes(const std::vector<PhysicalNodeSpec>& specs);

int total_capacity(const Topology& topology);

enum class DeployMode { FullRedeploy, FastClone };

std::string_view to_string(DeployMode mode);
DeployMode deploy_mode_from_string(std::string_view text);

/// Template distribution costs. Defaults are calibrated so the PowerEdge
/// profile (24 logical nodes, 84 VMs each) lands near 8 simulated hours for a
/// full redeploy and under one hour for a fast clone.
struct DeployTimings {
    SimTime full_seed_copy = seconds(600);
    SimTime full_clone = seconds(174);
    SimTime fast_seed_copy = seconds(90);
    SimTime fast_clone = seconds(2);

    void validate() const;
};

struct CopyStep {
    std::string node;
    std::string action;  // "seed_copy" | "fanout"
    int count = 0;
    SimTime duration = 0;
};

struct DeploymentPlan {
    DeployMode mode = DeployMode::FastClone;
    std::vector<CopyStep> steps;
    SimTime estimated_duration = 0;
};

/// Seed copies run node by node from one template source; intra-node fan-out
/// runs in parallel across nodes, so the estimate is
/// sum(seed copies) + max(per-node fan-out).
DeploymentPlan plan_template_distribution(const Topology& topology, DeployMode mode,
                                          const DeployTimings& timings);

std::vector<PhysicalNodeSpec> load_topology(const std::string& path);
std::vector<PhysicalNodeSpec> topology_from_json_text(const std::string& text,
                                                      const std::string& source_name);
std::string topology_to_json_text(const std::vector<PhysicalNodeSpec>& specs);

/// The challenge cluster shape: R740-like nodes with one controller and
/// R840-like nodes with two.
std::vector<PhysicalNodeSpec> poweredge_profile(int r740_count, int r840_count,
                                                int vm_capacity_per_controller);

}  // namespace rangeforge::cluster
