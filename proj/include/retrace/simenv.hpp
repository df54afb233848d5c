#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retrace/geometry.hpp"
#include "retrace/image.hpp"
#include "retrace/util.hpp"

namespace retrace {

/// Contact wrench on the end-effector, expressed in the EE frame.
/// Exactly zero when the EE is contact-free.
struct ForceReading {
    double fx = 0.0;
    double fy = 0.0;
    double torque = 0.0;

    friend bool operator==(const ForceReading&, const ForceReading&) = default;
};

enum class ShapeKind { Box, Socket, Lid };

/// One rigid scene element.  Boxes may be movable; sockets are static slot
/// fixtures; lids articulate about a hinge on their parent box.
struct SceneObject {
    ShapeKind shape = ShapeKind::Box;
    Pose pose;                  // object frame origin in the world
    bool movable = false;
    double hinge_angle = 0.0;   // lid only, radians CCW from closed
    double friction_coeff = 0.6;

    // box
    double half_w = 0.01;
    double half_h = 0.01;
    // socket: slot opening centered on local origin, walls below local y=0
    double socket_half_w = 0.020;
    double slot_half_w = 0.0065;
    double wall_depth = 0.025;
    double base_thickness = 0.005;
    // lid: hinge sits at local (-half_w, hinge_lift) of the parent box pose
    double lid_len = 0.065;
    double lid_thick = 0.006;
    double hinge_lift = 0.004;
    double hinge_max = 1.9;

    std::array<std::uint8_t, 3> color{200, 200, 200};

    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Circle {
    double lx = 0.0, ly = 0.0;  // center in the EE frame
    double r = 0.008;

    friend bool operator==(const Circle&, const Circle&) = default;
};

struct SimConfig {
    int image_size = 64;
    double view_half = 0.10;        // camera sees [-view_half, view_half]^2 in the EE frame
    double tick_dt = 0.1;           // 10 Hz control/recording tick
    int substeps = 10;              // 100 Hz internal integration
    double k_trans = 10000.0;       // spring stiffness per translational axis (critical damping)
    double k_rot = 10000.0;         // same contraction rate for rotation
    double rot_inertia = 4e-4;      // couples contact impulses to EE rotation
    int contact_iters = 8;
    double max_step_per_tick = 0.012;   // clamp on commanded per-tick deltas
    double max_rot_per_tick = 0.25;
    double max_force = 200.0;       // reported forces are clipped here
    double grasp_radius = 0.02;
    double render_noise_sigma = 0.02;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Scene-group randomization applied at reset: all objects are shifted
/// rigidly by a draw from a disc of radius trans_range and rotated about the
/// scenario anchor by a draw from [-rot_range, rot_range].  The EE start is
/// unchanged, so this randomizes the relative start pose.
struct RandomizationSpec {
    double trans_range = 0.0;  // meters (disc radius)
    double rot_range = 0.0;    // radians

    static RandomizationSpec none() { return {}; }
};

struct World {
    Pose ee_pose;
    Pose ee_target;             // last commanded absolute target (diagnostic)
    bool gripper_closed = false;
    double ee_vx = 0.0, ee_vy = 0.0, ee_vth = 0.0;
    std::vector<SceneObject> objects;
    std::string scenario_id;
    std::uint64_t rng_state = 0;  // reserved for seeded observation noise
    double time = 0.0;
    SimConfig cfg;
    std::vector<Circle> ee_body;
    int attached_object = -1;
    Pose attach_rel;            // grasped object pose in the EE frame
    Pose scene_offset;          // randomization applied at reset (diagnostic)
    ForceReading last_force;

    friend bool operator==(const World&, const World&) = default;
};

// ---------------------------------------------------------------------------
// Scenario registry
// ---------------------------------------------------------------------------

enum class SuccessKind { ReachGoal, PegInserted, BlockAtGoal, LidOpen };

struct Scenario {
    std::string id;
    std::vector<SceneObject> objects;  // canonical placement
    Pose ee_start;
    std::vector<Circle> ee_body;
    std::vector<Pose> script;          // demo waypoints (absolute, canonical world)
    int settle_ticks = 2;              // extra recorded ticks holding the final waypoint
    SuccessKind success = SuccessKind::ReachGoal;
    Pose goal_offset;                  // goal in frame of objects[goal_object]
    int goal_object = 0;
    double lid_open_angle = 0.45;
};

const Scenario& get_scenario(const std::string& id);
std::vector<std::string> scenario_ids();

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

/// Deterministic world for (scenario, seed, randomization).
/// Throws std::invalid_argument for unknown scenario ids.
World reset(const std::string& scenario, std::uint64_t seed, const RandomizationSpec& rnd,
            const SimConfig& cfg = SimConfig{});

/// Advance one control tick commanding a delta expressed in the EE frame
/// (the form actions take).  The spring-damper law per axis, integrated at
/// substep length h with stiffness K and damping C = 2*sqrt(K), is
///     v' = (v + h*K*(target - x)) / (1 + h*C + h*h*K),   x' = x + h*v',
/// with contacts resolved by projection and Coulomb friction after each
/// substep.  Returns the contact wrench averaged over the tick, clipped to
/// cfg.max_force.
ForceReading step_delta(World& w, const Pose& delta_ee_frame, bool gripper_cmd);

/// Same, commanding an absolute target pose.
ForceReading step_to(World& w, const Pose& target, bool gripper_cmd);

/// Value-style wrapper: one tick of duration dt (must be > 0; rounded to
/// whole substeps) toward an absolute target.
std::pair<World, ForceReading> step(const World& w, const Pose& target, bool gripper_cmd,
                                    double dt);

ForceReading read_force(const World& w);

/// Deterministic wrist-camera rasterization (camera fixed in the EE frame).
/// Supplying a noise seed adds seeded Gaussian pixel noise; without one the
/// render is noiseless.
Image render(const World& w, std::optional<std::uint64_t> noise_seed = std::nullopt);

bool success_predicate(const World& w);

/// Shift every stored pose by (dx, dy).  Offsets that are exact multiples of
/// the position grid preserve all relative geometry bit-for-bit.
World translated(const World& w, double dx, double dy);

/// Displace object `index` by (dx, dy) in the world frame; used by scripted
/// disturbance injection and tests.
void displace_object(World& w, int index, double dx, double dy);

}  // namespace retrace
