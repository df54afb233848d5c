#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retrace/demo.hpp"
#include "retrace/features.hpp"
#include "retrace/geometry.hpp"
#include "retrace/simenv.hpp"

namespace retrace {

struct CollectorConfig {
    int z = 10;                      // trajectories per demo waypoint
    double trans_range = 0.04;       // meters, per component
    double rot_range = 0.0698131700797731981;  // 4 degrees
    double theta = 0.94;             // disturbance similarity threshold
    PoseTolerance pose_tol{1e-3, 0.00872664625997164788};  // 1 mm, 0.5 deg
    int max_ticks_per_traj = 80;
    double return_step = 0.008;      // per-tick arc length of the return leg
    int max_attempts_per_waypoint = 50;
    double force_limit = 150.0;      // newtons; exceeded during a return -> stop
    std::uint64_t seed = 0;

    // ablation switches
    bool sequential = true;          // false: visit waypoints in random order
    bool check_reachability = true;
    bool check_disturbance = true;

    // fault injection: displace an object when collection reaches this
    // 1-based demo timestep (< 0 disables)
    int scripted_disturb_waypoint = -1;
    int scripted_disturb_object = 0;
    double scripted_disturb_dx = 0.016;
    double scripted_disturb_dy = 0.008;

    FeatureExtractor extractor;
};

/// Recorded return-to-waypoint trajectory.  target_index is the 1-based demo
/// timestep it lands on; steps carry self-labeled relative-pose actions.
struct AugTrajectory {
    int target_index = 0;
    Pose start_pose;  // achieved offset pose the return was executed from
    std::vector<DemoStep> steps;

    int length() const { return static_cast<int>(steps.size()); }
};

enum class StopReason { Completed, Disturbance, ForceLimit };
std::string to_string(StopReason r);
StopReason stop_reason_from_string(const std::string& s);

struct CollectionResult {
    std::vector<AugTrajectory> dataset;
    int r = 0;                        // 1-based last collected demo timestep
    std::vector<Action> zeta_remaining;  // actions R..N (1-based), empty when completed
    StopReason stop_reason = StopReason::Completed;
    int collected_waypoints = 0;      // distinct timesteps with stored data
    std::string scenario_id;
    std::uint64_t seed = 0;
    std::string demo_hash;
    std::string config_hash;
};

/// Uniform start offset: |dx|,|dy| <= trans_range, |dtheta| <= rot_range.
Pose sample_start_offset(Rng& rng, const CollectorConfig& cfg);

/// Alg. 3: pose equality within the controller's feasible precision.
bool check_reachability(const Pose& achieved, const Pose& target, const PoseTolerance& tol);

/// Alg. 4 recovery: home to waypoint 0 and replay the demo to waypoint
/// k_index (0-based).  Throws on unrecoverable state.
void return_to_waypoint(World& w, int k_index, const Demonstration& demo,
                        const PoseTolerance& tol);

struct TrajectoryCandidate {
    AugTrajectory traj;
    bool timed_out = false;
    bool force_tripped = false;
};

/// Alg. 2: drive to a sampled offset, then return along a straight segment
/// to demo waypoint k_index (0-based) at the demo tick rate, recording
/// (waypoint, observation, action) per tick.
TrajectoryCandidate sample_trajectory(World& w, const Demonstration& demo, int k_index,
                                      const CollectorConfig& cfg, Rng& rng);

/// Alg. 1: the full collection loop.  Pre: w freshly reset to the demo's
/// scenario and seed (the single environment reset).
CollectionResult collect(World& w, const Demonstration& demo, const CollectorConfig& cfg);

std::string collector_config_hash(const CollectorConfig& cfg);

/// dataset.jsonl (one trajectory header + step records each) and
/// manifest.json under dir.
void save_collection(const CollectionResult& res, const Demonstration& demo,
                     const std::string& dir);
CollectionResult load_collection(const std::string& dir, int image_size);

}  // namespace retrace
