#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "retrace/demo.hpp"
#include "retrace/fusion.hpp"
#include "retrace/nn.hpp"

namespace retrace {

/// Architecture of the visuomotor net: strided-conv image encoder, two-layer
/// force encoder, one gated recurrent layer (update/reset gates), linear
/// action head -> (dx, dy, dtheta, gripper logit).
struct NetConfig {
    int image_size = 64;
    int conv1_filters = 6, conv1_k = 8, conv1_stride = 4;
    int conv2_filters = 12, conv2_k = 4, conv2_stride = 2;
    int img_embed = 48;
    int force_hidden = 32;
    int force_embed = 100;
    int hidden = 64;
    bool recurrent = true;  // false = feedforward core (no-memory ablation)
    double force_scale = 5.0;

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Tiny configuration used by the finite-difference gradient check.
NetConfig tiny_net_config();

struct PolicyNet {
    NetConfig cfg;
    nn::ParamStore params;

    explicit PolicyNet(const NetConfig& c = NetConfig{});
    void init_weights(std::uint64_t seed);
    std::size_t param_count() const { return params.size(); }
};

struct ActionOut {
    Pose delta;            // denormalized when produced through a Policy
    double gripper_logit = 0.0;
};

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 8;
    int epochs = 50;
    double clip = 1.0;
    std::uint64_t seed = 0;
    enum class Optimizer { Adam, SgdMomentum } optimizer = Optimizer::Adam;
    double momentum = 0.9;
    bool augment_images = false;
    double augment_brightness = 0.10;
    double augment_noise = 0.02;
};

/// Trained policy: the net plus the demo-replay suffix and bookkeeping.
struct Policy {
    PolicyNet net;
    std::vector<Action> zeta_remaining;  // empty iff R == demo length
    int R = 0;                           // 1-based last collected demo timestep
    int demo_length = 0;
    int hidden_reset_interval = 0;       // 2 x waypoints with collected data
    std::array<double, 3> action_std{1.0, 1.0, 1.0};
    std::string scenario_id;

    Policy() : net(NetConfig{}) {}
};

/// One supervised step: observation input and (normalized delta, gripper)
/// target.  Targets pair each observation with the action taken *from* that
/// state; the terminal step's target is the identity delta, which is what
/// lets deployment detect arrival.
struct TrainSequence {
    std::vector<Observation> obs;
    std::vector<std::array<double, 4>> target;
};

std::array<double, 3> compute_action_std(const FusedDataset& data);
std::vector<TrainSequence> build_training_sequences(const FusedDataset& data,
                                                    const std::array<double, 3>& action_std);

/// Run the net over a sequence; one (normalized) action per input step.
std::pair<std::vector<ActionOut>, std::vector<double>> forward(
    const PolicyNet& net, const std::vector<Observation>& obs_seq, std::vector<double> h0 = {});

/// Mean over steps of squared delta error plus gripper BCE.
double loss(const PolicyNet& net, const std::vector<TrainSequence>& batch);

/// Reverse-mode gradient of loss; clipped to max_norm when > 0.
std::vector<double> grad(PolicyNet& net, const std::vector<TrainSequence>& batch,
                         double max_norm = 0.0);

struct TrainResult {
    Policy policy;
    std::vector<double> epoch_loss;
};

/// Behavioral cloning on the fused dataset.  Deterministic given (data, cfg).
/// Throws std::runtime_error on non-finite loss.
TrainResult train(const FusedDataset& data, const TrainConfig& cfg,
                  const NetConfig& net_cfg = NetConfig{});

void save_policy(const Policy& p, const std::string& path,
                 const std::string& inputs_hash = "");
Policy load_policy(const std::string& path);
std::string policy_inputs_hash(const std::string& path);

/// Single deployment step: feed one observation, update hidden state, return
/// the denormalized action.
Action policy_step(const Policy& p, const Observation& obs, std::vector<double>& hidden);

std::vector<double> initial_hidden(const Policy& p);

}  // namespace retrace
