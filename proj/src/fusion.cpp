#include "retrace/fusion.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "retrace/util.hpp"

namespace retrace {

using nlohmann::json;

FusedDataset fuse(const CollectionResult& result, const Demonstration& demo) {
    FusedDataset out;
    out.demo_hash = result.demo_hash;
    out.r = result.r;
    out.demo_length = demo.length();
    out.collected_waypoints = result.collected_waypoints;
    out.zeta_remaining = result.zeta_remaining;
    out.scenario_id = demo.scenario_id;
    out.seed = demo.seed;
    out.image_size = demo.image_size;
    out.tick_rate = demo.tick_rate;

    auto demo_step = [&](int idx, FusedSequence& seq) {
        const DemoStep& s = demo.steps[idx];
        seq.steps.push_back({s.obs, s.action});
        seq.waypoint_sidecar.push_back(s.waypoint);
    };

    // the original demonstration, truncated at R, comes first
    FusedSequence base;
    base.src = "demo";
    base.target_index = 0;
    base.start_pose = compose(demo.steps[0].waypoint, inverse(demo.steps[0].action.delta));
    for (int i = 0; i < result.r; ++i) demo_step(i, base);
    out.sequences.push_back(std::move(base));

    for (const auto& traj : result.dataset) {
        if (traj.target_index > result.r) {
            throw std::runtime_error("fuse: trajectory targets timestep " +
                                     std::to_string(traj.target_index) + " past R=" +
                                     std::to_string(result.r) + " (corrupt collection)");
        }
        FusedSequence seq;
        seq.src = "aug:" + std::to_string(traj.target_index);
        seq.target_index = traj.target_index;
        seq.start_pose = traj.start_pose;
        for (const auto& s : traj.steps) {
            seq.steps.push_back({s.obs, s.action});
            seq.waypoint_sidecar.push_back(s.waypoint);
        }
        // demo segment from the target waypoint through R (inclusive)
        for (int i = traj.target_index - 1; i < result.r; ++i) demo_step(i, seq);
        out.sequences.push_back(std::move(seq));
    }
    return out;
}

namespace {

constexpr int kFusedFormatVersion = 1;

json pose_to_json(const Pose& p) { return json::array({p.x, p.y, p.theta}); }

Pose pose_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

void save_fused(const FusedDataset& data, const std::string& dir) {
    std::ostringstream out, sidecar;
    json header;
    header["version"] = kFusedFormatVersion;
    header["kind"] = "fused";
    header["scenario"] = data.scenario_id;
    header["seed"] = data.seed;
    header["img"] = {{"w", data.image_size}, {"h", data.image_size}};
    header["tick_rate"] = data.tick_rate;
    header["R"] = data.r;
    header["demo_length"] = data.demo_length;
    header["collected_waypoints"] = data.collected_waypoints;
    header["n_seq"] = data.sequences.size();
    header["demo_hash"] = data.demo_hash;
    header["manifest_hash"] = data.manifest_hash;
    json zr = json::array();
    for (const auto& a : data.zeta_remaining) {
        zr.push_back({{"d", pose_to_json(a.delta)}, {"g", a.gripper}});
    }
    header["zeta_remaining"] = zr;
    out << header.dump() << "\n";
    for (const auto& seq : data.sequences) {
        json sh;
        sh["src"] = seq.src;
        sh["k"] = seq.target_index;
        sh["start"] = pose_to_json(seq.start_pose);
        sh["len"] = seq.steps.size();
        out << sh.dump() << "\n";
        for (const auto& st : seq.steps) {
            json j;
            j["img"] = base64_encode(st.obs.image.data.data(), st.obs.image.data.size());
            j["f"] = json::array({st.obs.force.fx, st.obs.force.fy, st.obs.force.torque});
            j["a"] = {{"d", pose_to_json(st.action.delta)}, {"g", st.action.gripper}};
            out << j.dump() << "\n";
        }
        json sc;
        sc["k"] = seq.target_index;
        json ws = json::array();
        for (const auto& w : seq.waypoint_sidecar) ws.push_back(pose_to_json(w));
        sc["w"] = ws;
        sidecar << sc.dump() << "\n";
    }
    atomic_write_file(dir + "/fused.jsonl", out.str());
    atomic_write_file(dir + "/fused.waypoints.jsonl", sidecar.str());
}

FusedDataset load_fused(const std::string& dir) {
    std::istringstream in(read_file(dir + "/fused.jsonl"));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(dir + ": empty fused file");
    json header = json::parse(line);
    if (header.value("version", -1) != kFusedFormatVersion) {
        throw std::runtime_error(dir + ": unsupported fused format version");
    }
    FusedDataset data;
    data.scenario_id = header.at("scenario").get<std::string>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.image_size = header.at("img").at("w").get<int>();
    data.tick_rate = header.at("tick_rate").get<double>();
    data.r = header.at("R").get<int>();
    data.demo_length = header.at("demo_length").get<int>();
    data.collected_waypoints = header.at("collected_waypoints").get<int>();
    data.demo_hash = header.value("demo_hash", "");
    data.manifest_hash = header.value("manifest_hash", "");
    for (const auto& ja : header.at("zeta_remaining")) {
        data.zeta_remaining.push_back({pose_from_json(ja.at("d")), ja.at("g").get<int>()});
    }
    std::size_t n_seq = header.at("n_seq").get<std::size_t>();
    for (std::size_t si = 0; si < n_seq; ++si) {
        if (!std::getline(in, line)) throw std::runtime_error(dir + ": truncated fused file");
        json sh = json::parse(line);
        FusedSequence seq;
        seq.src = sh.at("src").get<std::string>();
        seq.target_index = sh.at("k").get<int>();
        seq.start_pose = pose_from_json(sh.at("start"));
        std::size_t len = sh.at("len").get<std::size_t>();
        for (std::size_t i = 0; i < len; ++i) {
            if (!std::getline(in, line)) {
                throw std::runtime_error(dir + ": truncated sequence " + std::to_string(si));
            }
            json j = json::parse(line);
            FusedStep st;
            auto bytes = base64_decode(j.at("img").get<std::string>());
            st.obs.image = Image(data.image_size, data.image_size);
            if (bytes.size() != st.obs.image.data.size()) {
                throw std::runtime_error(dir + ": image size mismatch in sequence " +
                                         std::to_string(si));
            }
            st.obs.image.data = std::move(bytes);
            const json& f = j.at("f");
            st.obs.force = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
            st.action.delta = pose_from_json(j.at("a").at("d"));
            st.action.gripper = j.at("a").at("g").get<int>();
            seq.steps.push_back(std::move(st));
        }
        data.sequences.push_back(std::move(seq));
    }
    // sidecar (optional: training does not need it)
    try {
        std::istringstream sc(read_file(dir + "/fused.waypoints.jsonl"));
        std::size_t si = 0;
        while (std::getline(sc, line) && si < data.sequences.size()) {
            if (line.empty()) continue;
            json j = json::parse(line);
            for (const auto& jw : j.at("w")) {
                data.sequences[si].waypoint_sidecar.push_back(pose_from_json(jw));
            }
            ++si;
        }
    } catch (const std::runtime_error&) {
        // no sidecar present
    }
    return data;
}

}  // namespace retrace
