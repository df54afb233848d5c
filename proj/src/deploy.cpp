#include "retrace/deploy.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace retrace {

using nlohmann::json;

std::string to_string(SwitchedBy s) {
    switch (s) {
        case SwitchedBy::Identity: return "identity";
        case SwitchedBy::Timeout: return "timeout";
        case SwitchedBy::NotApplicable: return "n/a";
    }
    return "?";
}

bool is_identity_action(const Action& a, const DeployConfig& cfg) {
    return std::hypot(a.delta.x, a.delta.y) <= cfg.identity_eps_trans &&
           std::abs(a.delta.theta) <= cfg.identity_eps_rot;
}

EpisodeResult deploy_core(const ActionFn& action_fn, const std::function<void()>& reset_hidden,
                          int hidden_reset_interval, World& world,
                          const std::vector<Action>& suffix, const DeployConfig& cfg) {
    EpisodeResult res;
    int identity_streak = 0;
    bool timed_out = true;
    for (int tick = 0; tick < cfg.timeout_ticks; ++tick) {
        if (hidden_reset_interval > 0 && tick > 0 && tick % hidden_reset_interval == 0 &&
            reset_hidden) {
            reset_hidden();
        }
        Observation obs;
        obs.image = render(world);
        obs.force = read_force(world);
        Action a = action_fn(obs);
        if (is_identity_action(a, cfg)) {
            ++identity_streak;
            if (identity_streak >= cfg.identity_consecutive) {
                timed_out = false;
                res.ticks_closed_loop = tick + 1;
                break;
            }
            // identity predictions are not executed
            res.trace.push_back({tick, world.ee_pose, a, 0.0, true});
            res.ticks_closed_loop = tick + 1;
            continue;
        }
        identity_streak = 0;
        ForceReading f = step_delta(world, a.delta, a.gripper != 0);
        res.trace.push_back({tick, world.ee_pose, a, std::hypot(f.fx, f.fy), true});
        res.ticks_closed_loop = tick + 1;
    }
    res.switched_by = suffix.empty() ? SwitchedBy::NotApplicable
                                     : (timed_out ? SwitchedBy::Timeout : SwitchedBy::Identity);
    for (std::size_t i = 0; i < suffix.size(); ++i) {
        ForceReading f = step_delta(world, suffix[i].delta, suffix[i].gripper != 0);
        res.trace.push_back({res.ticks_closed_loop + static_cast<int>(i), world.ee_pose,
                             suffix[i], std::hypot(f.fx, f.fy), false});
    }
    res.success = success_predicate(world);
    return res;
}

EpisodeResult deploy(const Policy& pi, World& world, const DeployConfig& cfg) {
    std::vector<double> hidden = initial_hidden(pi);
    ActionFn fn = [&](const Observation& obs) { return policy_step(pi, obs, hidden); };
    auto reset_hidden = [&] { hidden.assign(hidden.size(), 0.0); };
    return deploy_core(fn, reset_hidden, pi.hidden_reset_interval, world, pi.zeta_remaining, cfg);
}

std::string trace_to_jsonl(const EpisodeResult& r) {
    std::ostringstream out;
    json header;
    header["kind"] = "episode";
    header["success"] = r.success;
    header["ticks_closed_loop"] = r.ticks_closed_loop;
    header["switched_by"] = to_string(r.switched_by);
    out << header.dump() << "\n";
    for (const auto& e : r.trace) {
        json j;
        j["t"] = e.tick;
        j["ee"] = json::array({e.ee.x, e.ee.y, e.ee.theta});
        j["a"] = {{"d", json::array({e.action.delta.x, e.action.delta.y, e.action.delta.theta})},
                  {"g", e.action.gripper}};
        j["fmag"] = e.force_mag;
        j["cl"] = e.closed_loop;
        out << j.dump() << "\n";
    }
    return out.str();
}

}  // namespace retrace
