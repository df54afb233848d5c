#pragma once

#include <stdexcept>
#include <string>

#include "retrace/collector.hpp"
#include "retrace/deploy.hpp"
#include "retrace/harness.hpp"
#include "retrace/policy.hpp"
#include "retrace/simenv.hpp"

namespace retrace {

/// Configuration rejected: carries the offending "section.key" path.
struct ConfigError : std::runtime_error {
    std::string key_path;
    ConfigError(const std::string& path, const std::string& msg)
        : std::runtime_error(msg + " (" + path + ")"), key_path(path) {}
};

/// Single source of hyperparameters for a run; fully defaulted.
struct RunConfig {
    std::string scenario = "reach";
    std::uint64_t seed = 0;
    std::string out = "runs/out";
    SimConfig sim;
    CollectorConfig collector;
    TrainConfig train;
    NetConfig net;
    DeployConfig deploy;
    EvalSpec eval;
};

/// Parse a key=value sections file ([run], [sim], [collector], [train],
/// [net], [deploy], [eval]).  Unknown sections or keys raise ConfigError.
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Canonical text form; its hash identifies the configuration.
std::string dump_run_config(const RunConfig& cfg);
std::string run_config_hash(const RunConfig& cfg);

}  // namespace retrace
