#pragma once

#include <string>
#include <vector>

#include "retrace/collector.hpp"
#include "retrace/demo.hpp"
#include "retrace/deploy.hpp"
#include "retrace/fusion.hpp"
#include "retrace/policy.hpp"

namespace retrace {

struct EvalSpec {
    std::string scenario = "reach";
    int trials = 20;
    double rand_trans = 0.04;                     // disc radius, meters
    double rand_rot = 0.0698131700797731981;      // 4 degrees
    std::uint64_t seed_base = 1000;
};

struct TrialRow {
    int trial = 0;
    std::uint64_t seed = 0;
    bool success = false;
    int ticks = 0;
    std::string switched_by = "n/a";
};

struct Report {
    std::string method;
    std::string scenario;
    int trials = 0;
    int successes = 0;
    double rate = 0.0;  // successes / trials, exact
    double mean_ticks = 0.0;
    std::string config_hash;
    std::vector<TrialRow> rows;

    std::string to_csv() const;
    static Report from_csv(const std::string& csv);
};

std::string markdown_table(const std::vector<Report>& reports);

/// Success rate over spec.trials independent episodes; trial i runs in a
/// world reset with seed seed_base + i.  Throws std::invalid_argument when
/// trials < 1.
Report evaluate(const Policy& pi, const EvalSpec& spec, const DeployConfig& dcfg = DeployConfig{});

/// Open-loop replay of the demonstrated actions from each randomized start.
Report baseline_demo_replay(const Demonstration& demo, const EvalSpec& spec);

/// Nearest-neighbor visual pose estimation over the collected dataset
/// followed by full demo replay.  injected_residual adds a fixed offset to
/// every estimate (controlled-residual study).
Report baseline_pose_replay(const CollectionResult& result, const Demonstration& demo,
                            const EvalSpec& spec, double injected_residual = 0.0);

enum class AblationMode { NoSequence, NoDisturbance, NoReachability, NoMemory, DataFraction };
AblationMode ablation_mode_from_string(const std::string& s);
std::string to_string(AblationMode m);

struct AblationSetup {
    Demonstration demo;
    CollectorConfig collector;
    TrainConfig train;
    NetConfig net;
    DeployConfig deploy;
    CollectionResult main_result;  // existing data for relabel/fraction/no-memory
    double fraction = 1.0;         // DataFraction: one of {0.25, 0.5, 0.75, 1.0}
};

/// Re-collect or re-train per the ablation definition and evaluate.  Throws
/// std::invalid_argument for a fraction outside {0.25, 0.5, 0.75, 1.0}.
Report run_ablation(AblationMode mode, const AblationSetup& setup, const EvalSpec& spec);

/// The pieces run_ablation composes (exposed for the CLI and tests).
CollectionResult relabel_no_reachability(const CollectionResult& result,
                                         const Demonstration& demo, double step_len);
FusedDataset subsample_fraction(const FusedDataset& data, double fraction, std::uint64_t seed);

}  // namespace retrace
