#include "retrace/demo.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "retrace/util.hpp"

namespace retrace {

using nlohmann::json;

namespace {

constexpr int kDemoFormatVersion = 1;

Observation observe(const World& w) {
    Observation o;
    o.image = render(w);
    o.force = read_force(w);
    return o;
}

// Free-space servo toward an absolute pose; false if not within tol in time.
bool servo_to(World& w, const Pose& target, bool grip, const PoseTolerance& tol, int max_ticks) {
    for (int i = 0; i < max_ticks; ++i) {
        Pose rel = relative(w.ee_pose, target);
        double d = std::hypot(rel.x, rel.y);
        double step_len = w.cfg.max_step_per_tick;
        if (d > step_len) {
            double f = step_len / d;
            rel.x *= f;
            rel.y *= f;
            rel.theta = std::clamp(rel.theta, -w.cfg.max_rot_per_tick, w.cfg.max_rot_per_tick);
        }
        step_delta(w, rel, grip);
        if (approx_eq(w.ee_pose, target, tol)) return true;
    }
    return false;
}

}  // namespace

Demonstration record_demo(World& world, const WaypointScript& script) {
    const PoseTolerance tol;  // controller precision in free space
    Demonstration demo;
    demo.scenario_id = world.scenario_id;
    demo.seed = world.rng_state;
    demo.tick_rate = 1.0 / world.cfg.tick_dt;
    demo.image_size = world.cfg.image_size;

    Pose prev = world.ee_pose;
    auto record_tick = [&](const Pose& target, bool grip) {
        step_to(world, target, grip);
        DemoStep s;
        s.waypoint = world.ee_pose;
        s.obs = observe(world);
        s.action = {relative(prev, world.ee_pose), grip ? 1 : 0};
        prev = world.ee_pose;
        demo.steps.push_back(s);
    };

    const int max_ticks_per_leg = 40;
    for (std::size_t i = 0; i < script.waypoints.size(); ++i) {
        const Pose& wp = script.waypoints[i];
        bool reached = false;
        for (int t = 0; t < max_ticks_per_leg && !reached; ++t) {
            record_tick(wp, false);
            reached = approx_eq(world.ee_pose, wp, tol);
        }
        if (!reached) {
            throw std::runtime_error("record_demo: script waypoint " + std::to_string(i) +
                                     " unreachable in scenario " + world.scenario_id);
        }
    }
    for (int t = 0; t < script.settle_ticks; ++t) record_tick(script.waypoints.back(), false);

    if (!success_predicate(world)) {
        throw std::runtime_error("record_demo: task predicate false at end of script in " +
                                 world.scenario_id);
    }
    if (demo.length() < 2) throw std::runtime_error("record_demo: demo too short");
    return demo;
}

Demonstration record_demo(World& world) {
    const Scenario& scn = get_scenario(world.scenario_id);
    WaypointScript script{scn.script, scn.settle_ticks};
    return record_demo(world, script);
}

// ---------------------------------------------------------------------------
// Serialization (JSON lines)
// ---------------------------------------------------------------------------

namespace {

json pose_to_json(const Pose& p) { return json::array({p.x, p.y, p.theta}); }

Pose pose_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("pose must be [x,y,theta]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json step_to_json(const DemoStep& s) {
    json j;
    j["w"] = pose_to_json(s.waypoint);
    j["img"] = base64_encode(s.obs.image.data.data(), s.obs.image.data.size());
    j["f"] = json::array({s.obs.force.fx, s.obs.force.fy, s.obs.force.torque});
    j["a"] = {{"d", pose_to_json(s.action.delta)}, {"g", s.action.gripper}};
    return j;
}

DemoStep step_from_json(const json& j, int image_size) {
    DemoStep s;
    s.waypoint = pose_from_json(j.at("w"));
    auto bytes = base64_decode(j.at("img").get<std::string>());
    s.obs.image = Image(image_size, image_size);
    if (bytes.size() != s.obs.image.data.size()) throw std::runtime_error("image size mismatch");
    s.obs.image.data = std::move(bytes);
    const json& f = j.at("f");
    s.obs.force = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
    const json& a = j.at("a");
    s.action.delta = pose_from_json(a.at("d"));
    s.action.gripper = a.at("g").get<int>();
    return s;
}

}  // namespace

void save_demo(const Demonstration& demo, const std::string& path) {
    std::ostringstream out;
    json header;
    header["version"] = kDemoFormatVersion;
    header["kind"] = "demo";
    header["scenario"] = demo.scenario_id;
    header["seed"] = demo.seed;
    header["tick_rate"] = demo.tick_rate;
    header["img"] = {{"w", demo.image_size}, {"h", demo.image_size}};
    header["steps"] = demo.length();
    out << header.dump() << "\n";
    for (const auto& s : demo.steps) out << step_to_json(s).dump() << "\n";
    atomic_write_file(path, out.str());
}

Demonstration load_demo(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty demo file");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": bad header: " + e.what());
    }
    if (header.value("version", -1) != kDemoFormatVersion) {
        throw std::runtime_error(path + ": unsupported demo format version " +
                                 header.value("version", json{}).dump());
    }
    Demonstration demo;
    demo.scenario_id = header.at("scenario").get<std::string>();
    demo.seed = header.at("seed").get<std::uint64_t>();
    demo.tick_rate = header.at("tick_rate").get<double>();
    demo.image_size = header.at("img").at("w").get<int>();
    const int expected = header.at("steps").get<int>();
    int idx = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            demo.steps.push_back(step_from_json(json::parse(line), demo.image_size));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ": record " + std::to_string(idx) + ": " + e.what());
        }
        ++idx;
    }
    if (idx != expected) {
        throw std::runtime_error(path + ": truncated: expected " + std::to_string(expected) +
                                 " records, found " + std::to_string(idx));
    }
    return demo;
}

void replay_to_waypoint(World& w, const Demonstration& demo, int k_index,
                        const PoseTolerance& tol) {
    if (k_index < 0 || k_index >= demo.length()) {
        throw std::out_of_range("replay_to_waypoint: bad index");
    }
    if (!servo_to(w, demo.steps[0].waypoint, demo.steps[0].action.gripper != 0, tol, 200)) {
        throw std::runtime_error("replay_to_waypoint: homing to waypoint 0 failed");
    }
    for (int n = 1; n <= k_index; ++n) {
        step_delta(w, demo.steps[n].action.delta, demo.steps[n].action.gripper != 0);
    }
    if (!approx_eq(w.ee_pose, demo.steps[k_index].waypoint, tol)) {
        throw std::runtime_error("replay_to_waypoint: replay missed waypoint " +
                                 std::to_string(k_index) + " in scenario " + w.scenario_id);
    }
}

}  // namespace retrace
