#pragma once

#include <functional>
#include <string>
#include <vector>

#include "retrace/demo.hpp"
#include "retrace/policy.hpp"
#include "retrace/simenv.hpp"

namespace retrace {

struct DeployConfig {
    double identity_eps_trans = 5e-4;                  // half of pose_tol
    double identity_eps_rot = 0.00436332312998582394;  // 0.25 degrees
    int identity_consecutive = 3;
    int timeout_ticks = 200;  // 20 s at 10 Hz
    double tick_rate = 10.0;
};

enum class SwitchedBy { Identity, Timeout, NotApplicable };
std::string to_string(SwitchedBy s);

struct TraceEntry {
    int tick = 0;
    Pose ee;
    Action action;
    double force_mag = 0.0;
    bool closed_loop = true;
};

struct EpisodeResult {
    bool success = false;
    int ticks_closed_loop = 0;
    SwitchedBy switched_by = SwitchedBy::NotApplicable;
    std::vector<TraceEntry> trace;
};

/// True iff |translation| <= identity_eps_trans and |rotation| <=
/// identity_eps_rot (inclusive).
bool is_identity_action(const Action& a, const DeployConfig& cfg);

/// Generic closed-loop driver: run action_fn until it produces
/// identity_consecutive identity actions in a row (checked before execution;
/// identity actions are not executed) or timeout_ticks elapse, then replay
/// the suffix.  reset_hidden is invoked every hidden_reset_interval ticks.
using ActionFn = std::function<Action(const Observation&)>;
EpisodeResult deploy_core(const ActionFn& action_fn, const std::function<void()>& reset_hidden,
                          int hidden_reset_interval, World& world,
                          const std::vector<Action>& suffix, const DeployConfig& cfg);

/// Alg. 8 with a trained policy.
EpisodeResult deploy(const Policy& pi, World& world, const DeployConfig& cfg);

std::string trace_to_jsonl(const EpisodeResult& r);

}  // namespace retrace
