// Pipeline front-end: record a scripted demonstration, collect augmentation
// trajectories around it, fuse them into a training set, train the policy,
// and evaluate -- each as a subcommand or end to end via `pipeline`.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "retrace/config.hpp"
#include "retrace/util.hpp"

namespace fs = std::filesystem;
using namespace retrace;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kValidationError = 3, kRuntimeError = 4 };

int g_verbosity = 1;  // RETRACE_LOG: quiet|info|debug

void log_info(const std::string& msg) {
    if (g_verbosity >= 1) std::cerr << "[retrace] " << msg << "\n";
}

std::string file_hash(const std::string& path) { return hash_hex(fnv1a64(read_file(path))); }

bool file_exists(const std::string& path) { return fs::exists(path); }

struct Ctx {
    RunConfig cfg;
    std::string config_path;
    std::string scenario_flag, out_flag;
    std::int64_t seed_flag = -1;

    void finalize() {
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (!scenario_flag.empty()) {
            cfg.scenario = scenario_flag;
            cfg.eval.scenario = scenario_flag;
        }
        if (seed_flag >= 0) {
            cfg.seed = static_cast<std::uint64_t>(seed_flag);
            cfg.collector.seed = cfg.seed;
            cfg.train.seed = cfg.seed;
        }
        if (!out_flag.empty()) cfg.out = out_flag;
    }
};

// ---------------------------------------------------------------------------
// Stages (shared by subcommands and pipeline)
// ---------------------------------------------------------------------------

std::string stage_demo(const RunConfig& cfg, const std::string& out_path) {
    World w = reset(cfg.scenario, cfg.seed, RandomizationSpec::none(), cfg.sim);
    Demonstration demo = record_demo(w);
    save_demo(demo, out_path);
    log_info("demo: " + std::to_string(demo.length()) + " steps -> " + out_path);
    return file_hash(out_path);
}

void stage_collect(const RunConfig& cfg, const std::string& demo_path, const std::string& dir) {
    Demonstration demo = load_demo(demo_path);
    World w = reset(demo.scenario_id, demo.seed, RandomizationSpec::none(), cfg.sim);
    CollectionResult res = collect(w, demo, cfg.collector);
    res.demo_hash = file_hash(demo_path);
    save_collection(res, demo, dir);
    log_info("collect: " + std::to_string(res.dataset.size()) + " trajectories, R=" +
             std::to_string(res.r) + " (" + to_string(res.stop_reason) + ") -> " + dir);
}

void stage_fuse(const RunConfig& cfg, const std::string& dataset_dir,
                const std::string& demo_path, const std::string& dir) {
    Demonstration demo = load_demo(demo_path);
    CollectionResult res = load_collection(dataset_dir, demo.image_size);
    (void)cfg;
    FusedDataset data = fuse(res, demo);
    data.demo_hash = file_hash(demo_path);
    data.manifest_hash = file_hash(dataset_dir + "/manifest.json");
    save_fused(data, dir);
    log_info("fuse: " + std::to_string(data.sequences.size()) + " sequences -> " + dir);
}

void stage_train(const RunConfig& cfg, const std::string& fused_dir,
                 const std::string& policy_path, const std::string& loss_path) {
    FusedDataset data = load_fused(fused_dir);
    TrainResult tr = train(data, cfg.train, cfg.net);
    std::string inputs = file_hash(fused_dir + "/fused.jsonl");
    save_policy(tr.policy, policy_path, inputs);
    std::ostringstream csv;
    csv << "epoch,loss\n";
    csv.precision(17);
    for (std::size_t i = 0; i < tr.epoch_loss.size(); ++i) csv << i << "," << tr.epoch_loss[i] << "\n";
    atomic_write_file(loss_path, csv.str());
    log_info("train: final loss " +
             (tr.epoch_loss.empty() ? std::string("n/a")
                                    : std::to_string(tr.epoch_loss.back())) +
             " -> " + policy_path);
}

void stage_eval(const RunConfig& cfg, const std::string& policy_path,
                const std::string& report_path) {
    Policy pi = load_policy(policy_path);
    EvalSpec spec = cfg.eval;
    if (spec.scenario.empty()) spec.scenario = pi.scenario_id;
    Report rep = evaluate(pi, spec, cfg.deploy);
    rep.config_hash = hash_hex(fnv1a64(file_hash(policy_path) + run_config_hash(cfg)));
    atomic_write_file(report_path, rep.to_csv());
    log_info("eval: " + std::to_string(rep.successes) + "/" + std::to_string(rep.trials) +
             " -> " + report_path);
}

int cmd_pipeline(const RunConfig& cfg) {
    const std::string out = cfg.out;
    fs::create_directories(out);
    fs::create_directories(out + "/collect");
    fs::create_directories(out + "/fused");

    const std::string demo_path = out + "/demo.jsonl";
    const std::string cfg_hash = run_config_hash(cfg);

    // each stage records its input hash; matching hashes allow resume
    auto stale = [&](const std::string& marker, const std::string& current) {
        if (!file_exists(marker)) return true;
        return read_file(marker) != current;
    };
    auto mark = [&](const std::string& marker, const std::string& current) {
        atomic_write_file(marker, current);
    };

    std::string demo_inputs = cfg_hash + "|demo";
    if (stale(out + "/demo.inputs", demo_inputs) || !file_exists(demo_path)) {
        stage_demo(cfg, demo_path);
        mark(out + "/demo.inputs", demo_inputs);
    } else {
        log_info("demo: up to date");
    }

    std::string collect_inputs = cfg_hash + "|" + file_hash(demo_path);
    if (stale(out + "/collect.inputs", collect_inputs)) {
        stage_collect(cfg, demo_path, out + "/collect");
        mark(out + "/collect.inputs", collect_inputs);
    } else {
        log_info("collect: up to date");
    }

    std::string fuse_inputs = collect_inputs + "|" + file_hash(out + "/collect/dataset.jsonl");
    if (stale(out + "/fuse.inputs", fuse_inputs)) {
        stage_fuse(cfg, out + "/collect", demo_path, out + "/fused");
        mark(out + "/fuse.inputs", fuse_inputs);
    } else {
        log_info("fuse: up to date");
    }

    std::string train_inputs = cfg_hash + "|" + file_hash(out + "/fused/fused.jsonl");
    if (stale(out + "/train.inputs", train_inputs)) {
        stage_train(cfg, out + "/fused", out + "/policy.bin", out + "/loss.csv");
        mark(out + "/train.inputs", train_inputs);
    } else {
        log_info("train: up to date");
    }

    std::string eval_inputs = cfg_hash + "|" + file_hash(out + "/policy.bin");
    if (stale(out + "/eval.inputs", eval_inputs)) {
        stage_eval(cfg, out + "/policy.bin", out + "/report.csv");
        mark(out + "/eval.inputs", eval_inputs);
    } else {
        log_info("eval: up to date");
    }

    Report rep = Report::from_csv(read_file(out + "/report.csv"));
    atomic_write_file(out + "/summary.md", markdown_table({rep}));
    return kOk;
}

int cmd_ablate(const RunConfig& cfg, const std::string& mode_str, double fraction) {
    AblationMode mode = ablation_mode_from_string(mode_str);
    const std::string out = cfg.out;
    fs::create_directories(out);

    // the ablation grid reuses the pipeline's demo + main collection
    const std::string demo_path = out + "/demo.jsonl";
    if (!file_exists(demo_path)) stage_demo(cfg, demo_path);
    Demonstration demo = load_demo(demo_path);
    if (!file_exists(out + "/collect/manifest.json")) {
        fs::create_directories(out + "/collect");
        stage_collect(cfg, demo_path, out + "/collect");
    }
    AblationSetup setup;
    setup.demo = demo;
    setup.collector = cfg.collector;
    setup.train = cfg.train;
    setup.net = cfg.net;
    setup.deploy = cfg.deploy;
    setup.main_result = load_collection(out + "/collect", demo.image_size);
    setup.fraction = fraction;

    Report rep = run_ablation(mode, setup, cfg.eval);
    std::ostringstream name;
    name << out << "/ablation_" << mode_str;
    if (mode == AblationMode::DataFraction) name << "_" << fraction;
    name << ".csv";
    atomic_write_file(name.str(), rep.to_csv());
    log_info("ablate " + rep.method + ": " + std::to_string(rep.successes) + "/" +
             std::to_string(rep.trials) + " -> " + name.str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* lv = std::getenv("RETRACE_LOG")) {
        std::string v = lv;
        g_verbosity = v == "quiet" ? 0 : v == "debug" ? 2 : 1;
    }

    CLI::App app{"self-supervised demonstration augmentation pipeline"};
    app.require_subcommand(1);

    Ctx ctx;
    app.add_option("--config", ctx.config_path, "config file (key=value sections)");
    app.add_option("--scenario", ctx.scenario_flag, "scenario id override");
    app.add_option("--seed", ctx.seed_flag, "seed override");
    app.add_option("--out", ctx.out_flag, "output directory override");

    std::string demo_path, dataset_dir, fused_dir, policy_path, mode_str;
    double fraction = 1.0;

    auto* c_demo = app.add_subcommand("demo", "record and save the scripted demonstration");
    auto* c_collect = app.add_subcommand("collect", "run the collector on a demo");
    c_collect->add_option("--demo", demo_path, "demo file")->required();
    auto* c_fuse = app.add_subcommand("fuse", "fuse a collection with its demo");
    c_fuse->add_option("--dataset", dataset_dir, "collection dir")->required();
    c_fuse->add_option("--demo", demo_path, "demo file")->required();
    auto* c_train = app.add_subcommand("train", "train the policy on a fused dataset");
    c_train->add_option("--fused", fused_dir, "fused dataset dir")->required();
    auto* c_eval = app.add_subcommand("eval", "evaluate a trained policy");
    c_eval->add_option("--policy", policy_path, "policy file")->required();
    auto* c_ablate = app.add_subcommand("ablate", "run one ablation");
    c_ablate->add_option("--mode", mode_str, "no-sequence|no-disturbance|no-reachability|no-memory|data-fraction")
        ->required();
    c_ablate->add_option("--fraction", fraction, "dataset fraction for data-fraction");
    auto* c_pipeline = app.add_subcommand("pipeline", "demo -> collect -> fuse -> train -> eval");

    CLI11_PARSE(app, argc, argv);

    try {
        ctx.finalize();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        const RunConfig& cfg = ctx.cfg;
        fs::create_directories(cfg.out);
        if (c_demo->parsed()) {
            stage_demo(cfg, cfg.out + "/demo.jsonl");
            return kOk;
        }
        if (c_collect->parsed()) {
            if (!file_exists(demo_path)) {
                std::cerr << "missing demo file: " << demo_path << "\n";
                return kValidationError;
            }
            stage_collect(cfg, demo_path, cfg.out);
            return kOk;
        }
        if (c_fuse->parsed()) {
            if (!file_exists(demo_path) || !file_exists(dataset_dir + "/manifest.json")) {
                std::cerr << "missing fuse inputs\n";
                return kValidationError;
            }
            stage_fuse(cfg, dataset_dir, demo_path, cfg.out);
            return kOk;
        }
        if (c_train->parsed()) {
            if (!file_exists(fused_dir + "/fused.jsonl")) {
                std::cerr << "missing fused dataset: " << fused_dir << "\n";
                return kValidationError;
            }
            stage_train(cfg, fused_dir, cfg.out + "/policy.bin", cfg.out + "/loss.csv");
            return kOk;
        }
        if (c_eval->parsed()) {
            if (!file_exists(policy_path)) {
                std::cerr << "missing policy file: " << policy_path << "\n";
                return kValidationError;
            }
            stage_eval(cfg, policy_path, cfg.out + "/report.csv");
            return kOk;
        }
        if (c_ablate->parsed()) return cmd_ablate(cfg, mode_str, fraction);
        if (c_pipeline->parsed()) return cmd_pipeline(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}
