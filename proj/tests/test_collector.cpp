#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "retrace/collector.hpp"
#include "retrace/util.hpp"

using namespace retrace;
namespace fs = std::filesystem;

namespace {

Demonstration record(const std::string& scenario) {
    World w = reset(scenario, 0, RandomizationSpec::none());
    return record_demo(w);
}

CollectorConfig small_cfg(int z = 10) {
    CollectorConfig cfg;
    cfg.z = z;
    return cfg;
}

}  // namespace

TEST_CASE("sample_start_offset: box bounds, zero range, moment oracle") {
    CollectorConfig cfg;  // 4 cm / 4 degrees defaults
    CHECK(cfg.trans_range == 0.04);
    CHECK(cfg.rot_range == doctest::Approx(4.0 * kPi / 180.0));
    Rng rng(3);
    double sx = 0, sy = 0, st = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Pose p = sample_start_offset(rng, cfg);
        CHECK(std::abs(p.x) <= cfg.trans_range);
        CHECK(std::abs(p.y) <= cfg.trans_range);
        CHECK(std::abs(p.theta) <= cfg.rot_range);
        sx += p.x;
        sy += p.y;
        st += p.theta;
    }
    // uniform(-r, r): sigma of the mean = r / sqrt(3 n)
    double tol3 = 3.0 * cfg.trans_range / std::sqrt(3.0 * n);
    CHECK(std::abs(sx / n) < tol3);
    CHECK(std::abs(sy / n) < tol3);
    CHECK(std::abs(st / n) < 3.0 * cfg.rot_range / std::sqrt(3.0 * n));

    CollectorConfig zero = cfg;
    zero.trans_range = 0.0;
    zero.rot_range = 0.0;
    Rng rng2(4);
    // degenerate ranges still consume draws but produce the identity offset
    Pose p = sample_start_offset(rng2, zero);
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    CHECK(p.theta == 0.0);
}

TEST_CASE("check_reachability: trivial, boundary inclusive, jammed return is false") {
    PoseTolerance tol{1e-3, 0.00872664625997164788};
    Pose p = make_pose(0.1, 0.2, 0.3);
    CHECK(check_reachability(p, p, tol));
    CHECK(check_reachability(make_pose(0.101, 0.2, 0.3), p, tol));  // exactly tol away
    CHECK_FALSE(check_reachability(make_pose(0.108, 0.2, 0.3), p, tol));  // 8 mm short
}

TEST_CASE("sample_trajectory: free-space step count and zero-offset single record") {
    Demonstration demo = record("reach");
    CollectorConfig cfg = small_cfg();

    SUBCASE("zero offset -> M == 1 identity-action record") {
        cfg.trans_range = 0.0;
        cfg.rot_range = 0.0;
        World w = reset("reach", 0, RandomizationSpec::none());
        replay_to_waypoint(w, demo, 4, cfg.pose_tol);
        Rng rng(1);
        TrajectoryCandidate cand = sample_trajectory(w, demo, 4, cfg, rng);
        CHECK_FALSE(cand.timed_out);
        CHECK(cand.traj.length() == 1);
        double mag = std::hypot(cand.traj.steps[0].action.delta.x,
                                cand.traj.steps[0].action.delta.y);
        CHECK(mag < 1e-6);
    }

    SUBCASE("small free-space offset -> M == ceil(dist / return_step) + settle") {
        World w = reset("reach", 0, RandomizationSpec::none());
        replay_to_waypoint(w, demo, 2, cfg.pose_tol);
        Rng rng(7);
        TrajectoryCandidate cand = sample_trajectory(w, demo, 2, cfg, rng);
        CHECK_FALSE(cand.timed_out);
        double dist = translation_distance(cand.traj.start_pose, demo.steps[2].waypoint);
        int legs = static_cast<int>(std::ceil(dist / cfg.return_step));
        CHECK(cand.traj.length() >= legs);
        CHECK(cand.traj.length() <= legs + 2);  // plus settle ticks at most
        // final record sits on the waypoint
        CHECK(approx_eq(cand.traj.steps.back().waypoint, demo.steps[2].waypoint, cfg.pose_tol));
        // action-chain closure within the trajectory
        for (int n = 1; n < cand.traj.length(); ++n) {
            Pose got = compose(cand.traj.steps[n - 1].waypoint, cand.traj.steps[n].action.delta);
            CHECK(translation_distance(got, cand.traj.steps[n].waypoint) < 1e-9);
        }
    }
}

TEST_CASE("sample_trajectory: in-slot returns record contact forces") {
    Demonstration demo = record("peg");
    CollectorConfig cfg = small_cfg();
    // deepest waypoint with data: near the end of the insertion
    int k = demo.length() - 3;
    World w = reset("peg", 0, RandomizationSpec::none());
    replay_to_waypoint(w, demo, k, cfg.pose_tol);
    Rng rng(5);
    bool saw_force = false;
    for (int i = 0; i < 10 && !saw_force; ++i) {
        TrajectoryCandidate cand = sample_trajectory(w, demo, k, cfg, rng);
        for (const auto& s : cand.traj.steps) {
            if (std::hypot(s.obs.force.fx, s.obs.force.fy) > 0.0) saw_force = true;
        }
        if (!check_reachability(w.ee_pose, demo.steps[k].waypoint, cfg.pose_tol)) {
            return_to_waypoint(w, k, demo, cfg.pose_tol);
        }
    }
    CHECK(saw_force);
}

TEST_CASE("return_to_waypoint recovers demo state after a jam") {
    Demonstration demo = record("peg");
    CollectorConfig cfg = small_cfg();
    int k = demo.length() - 3;
    World w = reset("peg", 0, RandomizationSpec::none());
    replay_to_waypoint(w, demo, k, cfg.pose_tol);
    Rng rng(2);
    // run candidates until one fails reachability, then recover
    bool failed = false;
    for (int i = 0; i < 40 && !failed; ++i) {
        sample_trajectory(w, demo, k, cfg, rng);
        failed = !check_reachability(w.ee_pose, demo.steps[k].waypoint, cfg.pose_tol);
        if (failed) {
            return_to_waypoint(w, k, demo, cfg.pose_tol);
            CHECK(approx_eq(w.ee_pose, demo.steps[k].waypoint, cfg.pose_tol));
        } else if (i + 1 < 40) {
            // stay at the waypoint for the next candidate
            return_to_waypoint(w, k, demo, cfg.pose_tol);
        }
    }
    CHECK(failed);  // the peg scenario must exercise the recovery branch
}

TEST_CASE("collect on reach: Z=10, N=10 -> exactly 100 valid ordered trajectories") {
    Demonstration demo = record("reach");
    REQUIRE(demo.length() == 10);
    CollectorConfig cfg = small_cfg(10);
    World w = reset("reach", 0, RandomizationSpec::none());
    CollectionResult res = collect(w, demo, cfg);

    CHECK(res.stop_reason == StopReason::Completed);
    CHECK(res.r == 10);
    CHECK(res.dataset.size() == 100);
    CHECK(res.zeta_remaining.empty());
    CHECK(res.collected_waypoints == 10);

    // ordering: non-decreasing target indices starting at 1
    CHECK(res.dataset.front().target_index == 1);
    for (std::size_t i = 1; i < res.dataset.size(); ++i) {
        CHECK(res.dataset[i].target_index >= res.dataset[i - 1].target_index);
    }
    // validity + cap
    std::map<int, int> per_k;
    for (const auto& t : res.dataset) {
        CHECK(approx_eq(t.steps.back().waypoint, demo.steps[t.target_index - 1].waypoint,
                        cfg.pose_tol));
        per_k[t.target_index]++;
    }
    for (const auto& [k, count] : per_k) CHECK(count == cfg.z);
}

TEST_CASE("collect is deterministic") {
    Demonstration demo = record("reach");
    CollectorConfig cfg = small_cfg(3);
    auto run = [&] {
        World w = reset("reach", 0, RandomizationSpec::none());
        return collect(w, demo, cfg);
    };
    CollectionResult a = run(), b = run();
    REQUIRE(a.dataset.size() == b.dataset.size());
    CHECK(a.r == b.r);
    for (std::size_t i = 0; i < a.dataset.size(); ++i) {
        CHECK(a.dataset[i].target_index == b.dataset[i].target_index);
        REQUIRE(a.dataset[i].length() == b.dataset[i].length());
        for (int n = 0; n < a.dataset[i].length(); ++n) {
            CHECK(a.dataset[i].steps[n].waypoint == b.dataset[i].steps[n].waypoint);
            CHECK(a.dataset[i].steps[n].obs.image == b.dataset[i].steps[n].obs.image);
        }
    }
}

TEST_CASE("scripted disturbance on push-block: R == j, nothing stored at or past j") {
    Demonstration demo = record("push-block");
    CollectorConfig cfg = small_cfg(4);
    cfg.scripted_disturb_waypoint = 4;
    cfg.scripted_disturb_object = 0;
    World w = reset("push-block", 0, RandomizationSpec::none());
    CollectionResult res = collect(w, demo, cfg);

    CHECK(res.stop_reason == StopReason::Disturbance);
    CHECK(res.r == 4);
    for (const auto& t : res.dataset) CHECK(t.target_index < 4);
    // full Z for every waypoint before the disturbance
    std::map<int, int> per_k;
    for (const auto& t : res.dataset) per_k[t.target_index]++;
    for (int k = 1; k < 4; ++k) CHECK(per_k[k] == cfg.z);
    // suffix holds actions j..N (1-based, inclusive)
    CHECK(static_cast<int>(res.zeta_remaining.size()) == demo.length() - 4 + 1);
    CHECK(res.zeta_remaining.front().delta == demo.steps[3].action.delta);
    CHECK(res.zeta_remaining.back().delta == demo.steps.back().action.delta);
}

TEST_CASE("natural disturbance on push-block stops collection before the push finishes") {
    Demonstration demo = record("push-block");
    CollectorConfig cfg = small_cfg(10);
    World w = reset("push-block", 0, RandomizationSpec::none());
    CollectionResult res = collect(w, demo, cfg);
    // ramming the block during outbound legs eventually trips the detector
    CHECK(res.stop_reason == StopReason::Disturbance);
    CHECK(res.r < demo.length());
    CHECK(res.r >= 1);
    for (const auto& t : res.dataset) CHECK(t.target_index < res.r);
}

TEST_CASE("force-limit stop is treated like a disturbance stop") {
    Demonstration demo = record("peg");
    CollectorConfig cfg = small_cfg(10);
    cfg.force_limit = 1e-3;  // trips on the first contact during a return
    World w = reset("peg", 0, RandomizationSpec::none());
    CollectionResult res = collect(w, demo, cfg);
    CHECK(res.stop_reason == StopReason::ForceLimit);
    CHECK(res.r >= 1);
    CHECK(!res.zeta_remaining.empty());
    for (const auto& t : res.dataset) CHECK(t.target_index < res.r);
}

TEST_CASE("no-sequence mode visits waypoints in a shuffled order") {
    Demonstration demo = record("reach");
    CollectorConfig cfg = small_cfg(2);
    cfg.sequential = false;
    cfg.seed = 9;
    World w = reset("reach", 0, RandomizationSpec::none());
    CollectionResult res = collect(w, demo, cfg);
    CHECK(res.dataset.size() == static_cast<std::size_t>(2 * demo.length()));
    bool out_of_order = false;
    for (std::size_t i = 1; i < res.dataset.size(); ++i) {
        if (res.dataset[i].target_index < res.dataset[i - 1].target_index) out_of_order = true;
    }
    CHECK(out_of_order);
}

TEST_CASE("collection round-trips through dataset.jsonl + manifest.json") {
    Demonstration demo = record("reach");
    CollectorConfig cfg = small_cfg(2);
    World w = reset("reach", 0, RandomizationSpec::none());
    CollectionResult res = collect(w, demo, cfg);
    res.demo_hash = "abc123";

    std::string dir = (fs::temp_directory_path() / "retrace_collect_rt").string();
    fs::create_directories(dir);
    save_collection(res, demo, dir);
    CollectionResult loaded = load_collection(dir, demo.image_size);
    CHECK(loaded.r == res.r);
    CHECK(loaded.stop_reason == res.stop_reason);
    CHECK(loaded.collected_waypoints == res.collected_waypoints);
    CHECK(loaded.demo_hash == "abc123");
    REQUIRE(loaded.dataset.size() == res.dataset.size());
    for (std::size_t i = 0; i < res.dataset.size(); ++i) {
        CHECK(loaded.dataset[i].target_index == res.dataset[i].target_index);
        CHECK(loaded.dataset[i].steps.size() == res.dataset[i].steps.size());
        CHECK(loaded.dataset[i].steps.back().obs.image == res.dataset[i].steps.back().obs.image);
        CHECK(loaded.dataset[i].steps.back().waypoint == res.dataset[i].steps.back().waypoint);
    }
    // byte-identical on re-save
    std::string bytes = read_file(dir + "/dataset.jsonl");
    save_collection(loaded, demo, dir);
    CHECK(read_file(dir + "/dataset.jsonl") == bytes);
    fs::remove_all(dir);
}
