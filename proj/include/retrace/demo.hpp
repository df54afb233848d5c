#pragma once

#include <string>
#include <vector>

#include "retrace/geometry.hpp"
#include "retrace/image.hpp"
#include "retrace/simenv.hpp"

namespace retrace {

struct Observation {
    Image image;
    ForceReading force;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Relative pose command for one tick, expressed in the previous EE frame,
/// plus the binary gripper state.
struct Action {
    Pose delta;
    int gripper = 0;

    friend bool operator==(const Action&, const Action&) = default;
};

struct DemoStep {
    Pose waypoint;  // realized EE pose (proprioception)
    Observation obs;
    Action action;  // realized relative pose that produced this step's state

    friend bool operator==(const DemoStep&, const DemoStep&) = default;
};

struct Demonstration {
    std::vector<DemoStep> steps;
    std::string scenario_id;
    std::uint64_t seed = 0;
    double tick_rate = 10.0;
    int image_size = 64;

    int length() const { return static_cast<int>(steps.size()); }

    friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

struct WaypointScript {
    std::vector<Pose> waypoints;
    int settle_ticks = 2;
};

/// Drive the EE through the script at the control tick rate, recording one
/// (waypoint, observation, action) triple per tick.  Contact legs take as
/// many ticks as they need; the script's final pose is held for settle_ticks
/// additional records.  Throws std::runtime_error when a script waypoint is
/// unreachable or the scenario's success predicate fails at the end.
Demonstration record_demo(World& world, const WaypointScript& script);

/// Record using the scenario's built-in script.
Demonstration record_demo(World& world);

void save_demo(const Demonstration& demo, const std::string& path);
Demonstration load_demo(const std::string& path);

/// Home to waypoint 0 (straight-line free-space move), then replay actions
/// 1..k_index, landing on waypoint k_index.  k_index == 0 is just homing.
/// Throws std::runtime_error if the EE fails to land within tol.
void replay_to_waypoint(World& w, const Demonstration& demo, int k_index,
                        const PoseTolerance& tol);

}  // namespace retrace
