#pragma once

#include <string>
#include <vector>

#include "retrace/collector.hpp"
#include "retrace/demo.hpp"

namespace retrace {

struct FusedStep {
    Observation obs;
    Action action;
};

/// One training sequence: an augmentation trajectory's (o, a) pairs followed
/// by the demo segment from its target waypoint through R, or the truncated
/// demo itself.  Waypoints live only in the sidecar so the training data
/// stays proprioception-free.
struct FusedSequence {
    std::string src;        // "demo" or "aug:<k>"
    int target_index = 0;   // 1-based demo timestep; 0 for the demo entry
    Pose start_pose;
    std::vector<FusedStep> steps;
    std::vector<Pose> waypoint_sidecar;  // one per step, test/diagnostic only
};

struct FusedDataset {
    std::vector<FusedSequence> sequences;  // demo entry first
    std::string demo_hash;
    std::string manifest_hash;
    int r = 0;
    int demo_length = 0;
    int collected_waypoints = 0;
    std::vector<Action> zeta_remaining;
    std::string scenario_id;
    std::uint64_t seed = 0;
    int image_size = 64;
    double tick_rate = 10.0;
};

/// Alg. 6.  Pre: every trajectory passed both validity conditions.  Throws
/// std::runtime_error if a trajectory targets a timestep past R (impossible
/// for a well-formed collection).
FusedDataset fuse(const CollectionResult& result, const Demonstration& demo);

/// fused.jsonl plus fused.waypoints.jsonl (sidecar) under dir.
void save_fused(const FusedDataset& data, const std::string& dir);
FusedDataset load_fused(const std::string& dir);

}  // namespace retrace
