#include "retrace/collector.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "retrace/util.hpp"

namespace retrace {

using nlohmann::json;

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::Completed: return "completed";
        case StopReason::Disturbance: return "disturbance";
        case StopReason::ForceLimit: return "force_limit";
    }
    return "unknown";
}

StopReason stop_reason_from_string(const std::string& s) {
    if (s == "completed") return StopReason::Completed;
    if (s == "disturbance") return StopReason::Disturbance;
    if (s == "force_limit") return StopReason::ForceLimit;
    throw std::runtime_error("bad stop_reason: " + s);
}

Pose sample_start_offset(Rng& rng, const CollectorConfig& cfg) {
    Pose p;
    p.x = rng.uniform_grid(cfg.trans_range);
    p.y = rng.uniform_grid(cfg.trans_range);
    p.theta = cfg.rot_range > 0.0 ? rng.uniform(-cfg.rot_range, cfg.rot_range) : 0.0;
    return p;
}

bool check_reachability(const Pose& achieved, const Pose& target, const PoseTolerance& tol) {
    return approx_eq(achieved, target, tol);
}

void return_to_waypoint(World& w, int k_index, const Demonstration& demo,
                        const PoseTolerance& tol) {
    replay_to_waypoint(w, demo, k_index, tol);
}

namespace {

Observation observe(const World& w) {
    Observation o;
    o.image = render(w);
    o.force = read_force(w);
    return o;
}

double force_magnitude(const ForceReading& f) { return std::hypot(f.fx, f.fy); }

}  // namespace

TrajectoryCandidate sample_trajectory(World& w, const Demonstration& demo, int k_index,
                                      const CollectorConfig& cfg, Rng& rng) {
    const Pose wp = demo.steps[k_index].waypoint;
    const int grip = demo.steps[k_index].action.gripper;

    // outbound: drive toward the sampled offset pose (not recorded)
    Pose offset = sample_start_offset(rng, cfg);
    const Pose outbound_target{wp.x + offset.x, wp.y + offset.y, wrap_angle(wp.theta + offset.theta)};
    const int outbound_budget =
        static_cast<int>(std::ceil(std::hypot(offset.x, offset.y) / cfg.return_step)) + 10;
    for (int t = 0; t < outbound_budget; ++t) {
        Pose rel = relative(w.ee_pose, outbound_target);
        double dist = std::hypot(rel.x, rel.y);
        if (dist <= cfg.return_step && std::abs(rel.theta) < 0.05) {
            step_delta(w, rel, grip != 0);
            break;
        }
        double f = cfg.return_step / std::max(dist, 1e-12);
        rel.x *= f;
        rel.y *= f;
        rel.theta = std::clamp(rel.theta, -0.05, 0.05);
        step_delta(w, rel, grip != 0);
    }

    TrajectoryCandidate out;
    out.traj.target_index = k_index + 1;
    out.traj.start_pose = w.ee_pose;

    // return: straight segment from the achieved offset back to the waypoint,
    // recorded per tick with self-labeled relative actions
    const Pose start = w.ee_pose;
    const double seg_dx = wp.x - start.x, seg_dy = wp.y - start.y;
    const double seg_dth = angular_distance(wp.theta, start.theta);
    const double dist = std::hypot(seg_dx, seg_dy);
    const int legs = std::max(1, static_cast<int>(std::ceil(dist / cfg.return_step)));

    Pose prev = w.ee_pose;
    auto record = [&](const Pose& target) {
        Pose rel = relative(w.ee_pose, target);
        ForceReading f = step_delta(w, rel, grip != 0);
        DemoStep s;
        s.waypoint = w.ee_pose;
        s.obs = observe(w);
        s.action = {relative(prev, w.ee_pose), grip};
        prev = w.ee_pose;
        out.traj.steps.push_back(s);
        if (force_magnitude(f) > cfg.force_limit) out.force_tripped = true;
    };

    for (int i = 1; i <= legs && !out.force_tripped; ++i) {
        double a = static_cast<double>(i) / legs;
        Pose target{start.x + a * seg_dx, start.y + a * seg_dy,
                    wrap_angle(start.theta + a * seg_dth)};
        record(target);
    }
    // settle onto the waypoint within the tick budget
    while (!out.force_tripped && !approx_eq(w.ee_pose, wp, cfg.pose_tol)) {
        if (out.traj.length() >= cfg.max_ticks_per_traj) {
            out.timed_out = true;
            break;
        }
        record(wp);
    }
    return out;
}

CollectionResult collect(World& w, const Demonstration& demo, const CollectorConfig& cfg) {
    const int n = demo.length();
    CollectionResult res;
    res.scenario_id = demo.scenario_id;
    res.seed = demo.seed;
    res.config_hash = collector_config_hash(cfg);

    Rng rng(cfg.seed);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    if (!cfg.sequential) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.next_u64() % i;
            std::swap(order[i - 1], order[j]);
        }
    }

    // move to the first waypoint to be collected
    return_to_waypoint(w, order[0], demo, cfg.pose_tol);

    bool stopped = false;
    int disturb_pending = cfg.scripted_disturb_waypoint;
    for (std::size_t oi = 0; oi < order.size() && !stopped; ++oi) {
        const int k_index = order[oi];
        const int k1 = k_index + 1;  // 1-based demo timestep
        if (!cfg.sequential && oi > 0) return_to_waypoint(w, k_index, demo, cfg.pose_tol);

        if (disturb_pending == k1) {
            displace_object(w, cfg.scripted_disturb_object, cfg.scripted_disturb_dx,
                            cfg.scripted_disturb_dy);
            disturb_pending = -1;
        }

        int stored = 0;
        std::vector<AugTrajectory> here;
        for (int attempts = 0; stored < cfg.z && attempts < cfg.max_attempts_per_waypoint;
             ++attempts) {
            TrajectoryCandidate cand = sample_trajectory(w, demo, k_index, cfg, rng);
            if (cand.force_tripped) {
                res.r = k1;
                res.stop_reason = StopReason::ForceLimit;
                stopped = true;
                break;
            }
            bool reachable = !cand.timed_out &&
                             check_reachability(w.ee_pose, demo.steps[k_index].waypoint,
                                                cfg.pose_tol);
            if (cfg.check_reachability && !reachable) {
                return_to_waypoint(w, k_index, demo, cfg.pose_tol);
                continue;  // retry this waypoint
            }
            if (!reachable) {
                // reachability check ablated: still recover so collection can
                // continue from the demo state
                return_to_waypoint(w, k_index, demo, cfg.pose_tol);
            }
            if (cfg.check_disturbance) {
                Image live = render(w);
                if (check_env_disturbance(demo.steps[k_index].obs, live, cfg.theta,
                                          cfg.extractor)) {
                    res.r = k1;
                    res.stop_reason = StopReason::Disturbance;
                    stopped = true;
                    break;  // trajectories stored at this waypoint are dropped
                }
            }
            here.push_back(std::move(cand.traj));
            ++stored;
        }
        if (stopped) break;
        for (auto& t : here) res.dataset.push_back(std::move(t));

        if (cfg.sequential && k_index + 1 < n) {
            // proceed to the next demonstration state by performing its action
            step_delta(w, demo.steps[k_index + 1].action.delta,
                       demo.steps[k_index + 1].action.gripper != 0);
            if (!approx_eq(w.ee_pose, demo.steps[k_index + 1].waypoint, cfg.pose_tol)) {
                return_to_waypoint(w, k_index + 1, demo, cfg.pose_tol);
            }
        }
    }

    if (!stopped) {
        res.r = n;
        res.stop_reason = StopReason::Completed;
        // completed collection leaves no replay suffix
    } else {
        for (int i = res.r - 1; i < n; ++i) res.zeta_remaining.push_back(demo.steps[i].action);
    }

    std::vector<bool> seen(n + 1, false);
    for (const auto& t : res.dataset) seen[t.target_index] = true;
    res.collected_waypoints = static_cast<int>(std::count(seen.begin(), seen.end(), true));
    return res;
}

std::string collector_config_hash(const CollectorConfig& cfg) {
    std::ostringstream ss;
    ss << cfg.z << "|" << cfg.trans_range << "|" << cfg.rot_range << "|" << cfg.theta << "|"
       << cfg.pose_tol.trans_tol << "|" << cfg.pose_tol.rot_tol << "|" << cfg.max_ticks_per_traj
       << "|" << cfg.return_step << "|" << cfg.max_attempts_per_waypoint << "|" << cfg.force_limit
       << "|" << cfg.seed << "|" << cfg.sequential << cfg.check_reachability
       << cfg.check_disturbance << "|" << cfg.scripted_disturb_waypoint << "|"
       << cfg.scripted_disturb_object << "|" << cfg.scripted_disturb_dx << "|"
       << cfg.scripted_disturb_dy << "|" << cfg.extractor.patch_size;
    return hash_hex(fnv1a64(ss.str()));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kDatasetFormatVersion = 1;

json pose_to_json(const Pose& p) { return json::array({p.x, p.y, p.theta}); }

Pose pose_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
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
    s.action.delta = pose_from_json(j.at("a").at("d"));
    s.action.gripper = j.at("a").at("g").get<int>();
    return s;
}

json action_to_json(const Action& a) {
    return json{{"d", pose_to_json(a.delta)}, {"g", a.gripper}};
}

Action action_from_json(const json& j) {
    return {pose_from_json(j.at("d")), j.at("g").get<int>()};
}

}  // namespace

void save_collection(const CollectionResult& res, const Demonstration& demo,
                     const std::string& dir) {
    std::ostringstream data;
    json header;
    header["version"] = kDatasetFormatVersion;
    header["kind"] = "dataset";
    header["scenario"] = res.scenario_id;
    header["seed"] = res.seed;
    header["img"] = {{"w", demo.image_size}, {"h", demo.image_size}};
    header["tick_rate"] = demo.tick_rate;
    header["n_traj"] = res.dataset.size();
    header["demo_hash"] = res.demo_hash;
    header["config_hash"] = res.config_hash;
    data << header.dump() << "\n";
    for (const auto& t : res.dataset) {
        json th;
        th["k"] = t.target_index;
        th["start"] = pose_to_json(t.start_pose);
        th["len"] = t.length();
        data << th.dump() << "\n";
        for (const auto& s : t.steps) data << step_to_json(s).dump() << "\n";
    }
    atomic_write_file(dir + "/dataset.jsonl", data.str());

    json manifest;
    manifest["version"] = kDatasetFormatVersion;
    manifest["kind"] = "manifest";
    manifest["R"] = res.r;
    manifest["stop_reason"] = to_string(res.stop_reason);
    manifest["collected_waypoints"] = res.collected_waypoints;
    manifest["demo_length"] = demo.length();
    manifest["scenario"] = res.scenario_id;
    manifest["seed"] = res.seed;
    manifest["demo_hash"] = res.demo_hash;
    manifest["config_hash"] = res.config_hash;
    json zr = json::array();
    for (const auto& a : res.zeta_remaining) zr.push_back(action_to_json(a));
    manifest["zeta_remaining"] = zr;
    atomic_write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

CollectionResult load_collection(const std::string& dir, int image_size) {
    CollectionResult res;
    json manifest = json::parse(read_file(dir + "/manifest.json"));
    if (manifest.value("version", -1) != kDatasetFormatVersion) {
        throw std::runtime_error(dir + ": unsupported manifest version");
    }
    res.r = manifest.at("R").get<int>();
    res.stop_reason = stop_reason_from_string(manifest.at("stop_reason").get<std::string>());
    res.collected_waypoints = manifest.at("collected_waypoints").get<int>();
    res.scenario_id = manifest.at("scenario").get<std::string>();
    res.seed = manifest.at("seed").get<std::uint64_t>();
    res.demo_hash = manifest.value("demo_hash", "");
    res.config_hash = manifest.value("config_hash", "");
    for (const auto& ja : manifest.at("zeta_remaining")) {
        res.zeta_remaining.push_back(action_from_json(ja));
    }

    std::istringstream in(read_file(dir + "/dataset.jsonl"));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(dir + ": empty dataset file");
    json header = json::parse(line);
    if (header.value("version", -1) != kDatasetFormatVersion) {
        throw std::runtime_error(dir + ": unsupported dataset version");
    }
    std::size_t n_traj = header.at("n_traj").get<std::size_t>();
    for (std::size_t ti = 0; ti < n_traj; ++ti) {
        if (!std::getline(in, line)) throw std::runtime_error(dir + ": truncated dataset");
        json th = json::parse(line);
        AugTrajectory t;
        t.target_index = th.at("k").get<int>();
        t.start_pose = pose_from_json(th.at("start"));
        int len = th.at("len").get<int>();
        for (int i = 0; i < len; ++i) {
            if (!std::getline(in, line)) {
                throw std::runtime_error(dir + ": truncated trajectory " + std::to_string(ti) +
                                         " at record " + std::to_string(i));
            }
            t.steps.push_back(step_from_json(json::parse(line), image_size));
        }
        res.dataset.push_back(std::move(t));
    }
    return res;
}

}  // namespace retrace
