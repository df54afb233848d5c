#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "retrace/fusion.hpp"
#include "retrace/util.hpp"

using namespace retrace;
namespace fs = std::filesystem;

namespace {

Demonstration record(const std::string& scenario) {
    World w = reset(scenario, 0, RandomizationSpec::none());
    return record_demo(w);
}

CollectionResult collect_for(const Demonstration& demo, int z,
                             int scripted_waypoint = -1) {
    CollectorConfig cfg;
    cfg.z = z;
    cfg.scripted_disturb_waypoint = scripted_waypoint;
    World w = reset(demo.scenario_id, demo.seed, RandomizationSpec::none());
    return collect(w, demo, cfg);
}

}  // namespace

TEST_CASE("degenerate fusion: empty dataset, R == N -> only the demo") {
    Demonstration demo = record("reach");
    CollectionResult res;
    res.r = demo.length();
    res.collected_waypoints = 0;
    res.scenario_id = demo.scenario_id;
    FusedDataset out = fuse(res, demo);
    REQUIRE(out.sequences.size() == 1);
    CHECK(out.sequences[0].src == "demo");
    CHECK(out.sequences[0].steps.size() == static_cast<std::size_t>(demo.length()));
}

TEST_CASE("fused lengths: M + (R - k + 1); count == 1 + |D|") {
    Demonstration demo = record("reach");
    CollectionResult res = collect_for(demo, 2);
    FusedDataset out = fuse(res, demo);
    CHECK(out.sequences.size() == 1 + res.dataset.size());
    for (std::size_t i = 0; i < res.dataset.size(); ++i) {
        const auto& traj = res.dataset[i];
        const auto& seq = out.sequences[i + 1];
        CHECK(seq.steps.size() ==
              traj.steps.size() + static_cast<std::size_t>(res.r - traj.target_index + 1));
        CHECK(seq.target_index == traj.target_index);
    }
}

TEST_CASE("fusion strips waypoints from steps but keeps them in the sidecar") {
    Demonstration demo = record("reach");
    CollectionResult res = collect_for(demo, 1);
    FusedDataset out = fuse(res, demo);
    for (const auto& seq : out.sequences) {
        CHECK(seq.waypoint_sidecar.size() == seq.steps.size());
    }
    // serialized steps carry no 'w' field
    std::string dir = (fs::temp_directory_path() / "retrace_fuse_fields").string();
    fs::create_directories(dir);
    save_fused(out, dir);
    std::string bytes = read_file(dir + "/fused.jsonl");
    CHECK(bytes.find("\"w\":[") == std::string::npos);
    CHECK(read_file(dir + "/fused.waypoints.jsonl").find("\"w\":[") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("trajectory past R is rejected with an integrity error") {
    Demonstration demo = record("reach");
    CollectionResult res = collect_for(demo, 1);
    res.r = 3;
    CHECK_THROWS_WITH_AS(fuse(res, demo), doctest::Contains("past R"), std::runtime_error);
}

TEST_CASE("push-block with scripted disturbance: every fused sequence ends at demo step R") {
    Demonstration demo = record("push-block");
    CollectionResult res = collect_for(demo, 3, 4);
    REQUIRE(res.r == 4);
    FusedDataset out = fuse(res, demo);
    const Observation& at_r = demo.steps[res.r - 1].obs;
    for (const auto& seq : out.sequences) {
        CHECK(seq.steps.back().obs.image == at_r.image);
        CHECK(seq.waypoint_sidecar.back() == demo.steps[res.r - 1].waypoint);
    }
}

TEST_CASE("seam continuity: trajectory end meets demo waypoint k within pose_tol") {
    Demonstration demo = record("reach");
    CollectionResult res = collect_for(demo, 2);
    FusedDataset out = fuse(res, demo);
    const PoseTolerance tol;
    for (std::size_t i = 1; i < out.sequences.size(); ++i) {
        const auto& seq = out.sequences[i];
        const auto& traj = res.dataset[i - 1];
        // last trajectory record vs the demo waypoint it targets
        const Pose& end_wp = seq.waypoint_sidecar[traj.steps.size() - 1];
        CHECK(approx_eq(end_wp, demo.steps[traj.target_index - 1].waypoint, tol));
    }
}

TEST_CASE("replayability: fused actions from the recorded start land on waypoint R") {
    const PoseTolerance tol;
    for (const char* id : {"reach", "peg"}) {
        Demonstration demo = record(id);
        CollectionResult res = collect_for(demo, 2);
        FusedDataset out = fuse(res, demo);
        int failures = 0;
        for (const auto& seq : out.sequences) {
            World w = reset(id, 0, RandomizationSpec::none());
            w.ee_pose = seq.start_pose;
            for (std::size_t n = 0; n < seq.steps.size(); ++n) {
                step_delta(w, seq.steps[n].action.delta, seq.steps[n].action.gripper != 0);
            }
            if (!approx_eq(w.ee_pose, demo.steps[res.r - 1].waypoint, tol)) ++failures;
        }
        INFO(id, ": ", failures, "/", out.sequences.size());
        CHECK(failures == 0);
    }
}

TEST_CASE("fused dataset round-trips through files") {
    Demonstration demo = record("reach");
    CollectionResult res = collect_for(demo, 1);
    FusedDataset out = fuse(res, demo);
    out.demo_hash = "dh";
    out.manifest_hash = "mh";
    std::string dir = (fs::temp_directory_path() / "retrace_fuse_rt").string();
    fs::create_directories(dir);
    save_fused(out, dir);
    FusedDataset loaded = load_fused(dir);
    CHECK(loaded.sequences.size() == out.sequences.size());
    CHECK(loaded.r == out.r);
    CHECK(loaded.demo_hash == "dh");
    CHECK(loaded.manifest_hash == "mh");
    for (std::size_t i = 0; i < out.sequences.size(); ++i) {
        CHECK(loaded.sequences[i].src == out.sequences[i].src);
        REQUIRE(loaded.sequences[i].steps.size() == out.sequences[i].steps.size());
        for (std::size_t n = 0; n < out.sequences[i].steps.size(); ++n) {
            CHECK(loaded.sequences[i].steps[n].obs.image == out.sequences[i].steps[n].obs.image);
            CHECK(loaded.sequences[i].steps[n].action == out.sequences[i].steps[n].action);
        }
        CHECK(loaded.sequences[i].waypoint_sidecar == out.sequences[i].waypoint_sidecar);
    }
    fs::remove_all(dir);
}
