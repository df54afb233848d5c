#include "retrace/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "retrace/util.hpp"

namespace retrace {

using nlohmann::json;
using nn::Tape;

static_assert(std::endian::native == std::endian::little,
              "policy files are little-endian; big-endian hosts need byte swaps");

NetConfig tiny_net_config() {
    NetConfig c;
    c.image_size = 8;
    c.conv1_filters = 2;
    c.conv1_k = 4;
    c.conv1_stride = 2;
    c.conv2_filters = 2;
    c.conv2_k = 2;
    c.conv2_stride = 1;
    c.img_embed = 4;
    c.force_hidden = 3;
    c.force_embed = 4;
    c.hidden = 4;
    return c;
}

namespace {

struct Dims {
    int o1 = 0, o2 = 0, flat = 0, input = 0;
};

Dims net_dims(const NetConfig& c) {
    Dims d;
    d.o1 = nn::conv_out(c.image_size, c.conv1_k, c.conv1_stride);
    d.o2 = nn::conv_out(d.o1, c.conv2_k, c.conv2_stride);
    d.flat = c.conv2_filters * d.o2 * d.o2;
    d.input = c.img_embed + c.force_embed;
    return d;
}

void register_views(nn::ParamStore& ps, const NetConfig& c) {
    const Dims d = net_dims(c);
    ps.add("conv1_w", c.conv1_filters, 3 * c.conv1_k * c.conv1_k);
    ps.add("conv1_b", c.conv1_filters, 1);
    ps.add("conv2_w", c.conv2_filters, c.conv1_filters * c.conv2_k * c.conv2_k);
    ps.add("conv2_b", c.conv2_filters, 1);
    ps.add("img_fc_w", c.img_embed, d.flat);
    ps.add("img_fc_b", c.img_embed, 1);
    ps.add("force_w1", c.force_hidden, 3);
    ps.add("force_b1", c.force_hidden, 1);
    ps.add("force_w2", c.force_embed, c.force_hidden);
    ps.add("force_b2", c.force_embed, 1);
    if (c.recurrent) {
        for (const char* g : {"z", "r", "c"}) {
            ps.add(std::string("gru_") + g + "_w", c.hidden, d.input);
            ps.add(std::string("gru_") + g + "_u", c.hidden, c.hidden);
            ps.add(std::string("gru_") + g + "_b", c.hidden, 1);
        }
    } else {
        ps.add("core_w", c.hidden, d.input);
        ps.add("core_b", c.hidden, 1);
    }
    ps.add("head_w", 4, c.hidden);
    ps.add("head_b", 4, 1);
}

struct Bound {
    std::vector<int> ids;  // parallel to ParamStore views
    int id(const nn::ParamStore& ps, const char* name) const {
        int i = ps.index_of(name);
        if (i < 0) throw std::logic_error(std::string("missing view ") + name);
        return ids[i];
    }
};

Bound bind(Tape& t, nn::ParamStore& ps) {
    Bound b;
    b.ids.resize(ps.view_count());
    for (int i = 0; i < ps.view_count(); ++i) b.ids[i] = t.param(ps, i);
    return b;
}

struct AugmentParams {
    double brightness = 0.0;
    double contrast = 1.0;
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
};

std::vector<double> image_to_input(const Image& img, const AugmentParams* aug = nullptr) {
    const int s = img.width;
    std::vector<double> v(static_cast<std::size_t>(3) * s * s);
    std::size_t i = 0;
    for (int ch = 0; ch < 3; ++ch)
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c) v[i++] = img.intensity(r, c, ch);
    if (aug) {
        Rng rng(aug->noise_seed);
        for (auto& x : v) {
            x = std::clamp((x - 0.5) * aug->contrast + 0.5 + aug->brightness +
                               (aug->noise > 0 ? aug->noise * rng.normal() : 0.0),
                           0.0, 1.0);
        }
    }
    return v;
}

std::vector<double> force_to_input(const ForceReading& f, double scale) {
    return {f.fx / scale, f.fy / scale, f.torque / scale};
}

// One timestep of the net; updates h_node (ignored by the feedforward core).
int build_step(Tape& t, const NetConfig& c, const Bound& b, const nn::ParamStore& ps, int img_in,
               int force_in, int& h_node) {
    const Dims d = net_dims(c);
    int col1 = t.im2col(img_in, 3, c.image_size, c.image_size, c.conv1_k, c.conv1_stride);
    int c1 = t.relu(t.add_col_broadcast(t.matmul(b.id(ps, "conv1_w"), col1), b.id(ps, "conv1_b")));
    int c1v = t.reshape(c1, c.conv1_filters * d.o1 * d.o1, 1);
    int col2 = t.im2col(c1v, c.conv1_filters, d.o1, d.o1, c.conv2_k, c.conv2_stride);
    int c2 = t.relu(t.add_col_broadcast(t.matmul(b.id(ps, "conv2_w"), col2), b.id(ps, "conv2_b")));
    int flat = t.reshape(c2, d.flat, 1);
    int img_e = t.relu(t.add(t.matmul(b.id(ps, "img_fc_w"), flat), b.id(ps, "img_fc_b")));

    int f1 = t.relu(t.add(t.matmul(b.id(ps, "force_w1"), force_in), b.id(ps, "force_b1")));
    int f2 = t.relu(t.add(t.matmul(b.id(ps, "force_w2"), f1), b.id(ps, "force_b2")));
    int x = t.concat_rows(img_e, f2);

    if (c.recurrent) {
        int z = t.sigmoid(t.add(t.add(t.matmul(b.id(ps, "gru_z_w"), x),
                                      t.matmul(b.id(ps, "gru_z_u"), h_node)),
                                b.id(ps, "gru_z_b")));
        int r = t.sigmoid(t.add(t.add(t.matmul(b.id(ps, "gru_r_w"), x),
                                      t.matmul(b.id(ps, "gru_r_u"), h_node)),
                                b.id(ps, "gru_r_b")));
        int rh = t.hadamard(r, h_node);
        int cand = t.tanh_(t.add(
            t.add(t.matmul(b.id(ps, "gru_c_w"), x), t.matmul(b.id(ps, "gru_c_u"), rh)),
            b.id(ps, "gru_c_b")));
        int one_minus_z = t.affine(z, -1.0, 1.0);
        h_node = t.add(t.hadamard(one_minus_z, h_node), t.hadamard(z, cand));
    } else {
        h_node = t.tanh_(t.add(t.matmul(b.id(ps, "core_w"), x), b.id(ps, "core_b")));
    }
    return t.add(t.matmul(b.id(ps, "head_w"), h_node), b.id(ps, "head_b"));
}

// Scaled loss node for one sequence (sum over steps; caller divides).
int build_sequence_loss(Tape& t, const NetConfig& c, const Bound& b, const nn::ParamStore& ps,
                        const TrainSequence& seq, const AugmentParams* aug) {
    std::vector<double> h0(c.hidden, 0.0);
    int h = t.input(h0, c.hidden, 1);
    std::vector<int> terms;
    for (std::size_t n = 0; n < seq.obs.size(); ++n) {
        int img = t.input(image_to_input(seq.obs[n].image, aug), 3 * c.image_size * c.image_size, 1);
        int frc = t.input(force_to_input(seq.obs[n].force, c.force_scale), 3, 1);
        int act = build_step(t, c, b, ps, img, frc, h);
        int delta = t.slice_rows(act, 0, 3);
        std::vector<double> tgt(seq.target[n].begin(), seq.target[n].begin() + 3);
        terms.push_back(t.sum_sq(t.sub(delta, t.input(tgt, 3, 1))));
        terms.push_back(t.bce_logit(t.slice_rows(act, 3, 4), seq.target[n][3]));
    }
    return t.add_many(terms);
}

}  // namespace

PolicyNet::PolicyNet(const NetConfig& c) : cfg(c) { register_views(params, cfg); }

void PolicyNet::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    params.init(rng);
}

std::array<double, 3> compute_action_std(const FusedDataset& data) {
    double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
    std::size_t n = 0;
    for (const auto& seq : data.sequences) {
        for (const auto& st : seq.steps) {
            const double d[3] = {st.action.delta.x, st.action.delta.y, st.action.delta.theta};
            for (int i = 0; i < 3; ++i) {
                sum[i] += d[i];
                sum2[i] += d[i] * d[i];
            }
            ++n;
        }
    }
    std::array<double, 3> out{1, 1, 1};
    if (n > 0) {
        for (int i = 0; i < 3; ++i) {
            double mean = sum[i] / n;
            double var = std::max(0.0, sum2[i] / n - mean * mean);
            out[i] = std::max(std::sqrt(var), 1e-6);
        }
    }
    return out;
}

std::vector<TrainSequence> build_training_sequences(const FusedDataset& data,
                                                    const std::array<double, 3>& action_std) {
    std::vector<TrainSequence> out;
    out.reserve(data.sequences.size());
    for (const auto& seq : data.sequences) {
        TrainSequence ts;
        const std::size_t len = seq.steps.size();
        for (std::size_t n = 0; n < len; ++n) {
            ts.obs.push_back(seq.steps[n].obs);
            std::array<double, 4> tgt{0, 0, 0, 0};
            if (n + 1 < len) {
                const Action& a = seq.steps[n + 1].action;
                tgt = {a.delta.x / action_std[0], a.delta.y / action_std[1],
                       a.delta.theta / action_std[2], static_cast<double>(a.gripper)};
            } else {
                // terminal step: identity delta, hold the gripper state
                tgt[3] = static_cast<double>(seq.steps[n].action.gripper);
            }
            ts.target.push_back(tgt);
        }
        out.push_back(std::move(ts));
    }
    return out;
}

std::pair<std::vector<ActionOut>, std::vector<double>> forward(
    const PolicyNet& net, const std::vector<Observation>& obs_seq, std::vector<double> h0) {
    auto& ps = const_cast<nn::ParamStore&>(net.params);  // no-grad tape never writes
    Tape t(false);
    Bound b = bind(t, ps);
    if (h0.empty()) h0.assign(net.cfg.hidden, 0.0);
    if (static_cast<int>(h0.size()) != net.cfg.hidden)
        throw std::invalid_argument("hidden state size mismatch");
    int h = t.input(h0, net.cfg.hidden, 1);
    std::vector<ActionOut> actions;
    for (const auto& obs : obs_seq) {
        if (obs.image.width != net.cfg.image_size)
            throw std::invalid_argument("observation image dims do not match the net config");
        int img = t.input(image_to_input(obs.image), 3 * net.cfg.image_size * net.cfg.image_size, 1);
        int frc = t.input(force_to_input(obs.force, net.cfg.force_scale), 3, 1);
        int act = build_step(t, net.cfg, b, ps, img, frc, h);
        const auto& v = t.value(act);
        actions.push_back({Pose{v[0], v[1], v[2]}, v[3]});
    }
    return {actions, t.value(h)};
}

double loss(const PolicyNet& net, const std::vector<TrainSequence>& batch) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    auto& ps = const_cast<nn::ParamStore&>(net.params);
    std::size_t total = 0;
    for (const auto& s : batch) total += s.obs.size();
    double sum = 0.0;
    for (const auto& s : batch) {
        Tape t(false);
        Bound b = bind(t, ps);
        int l = build_sequence_loss(t, net.cfg, b, ps, s, nullptr);
        sum += t.value(l)[0];
    }
    return sum / static_cast<double>(total);
}

std::vector<double> grad(PolicyNet& net, const std::vector<TrainSequence>& batch,
                         double max_norm) {
    net.params.zero_grad();
    std::size_t total = 0;
    for (const auto& s : batch) total += s.obs.size();
    for (const auto& s : batch) {
        Tape t(true);
        Bound b = bind(t, net.params);
        int l = t.scale(build_sequence_loss(t, net.cfg, b, net.params, s, nullptr),
                        1.0 / static_cast<double>(total));
        t.backward(l);
    }
    std::vector<double> g = net.params.grads();
    if (max_norm > 0.0) {
        double n2 = 0.0;
        for (double v : g) n2 += v * v;
        double n = std::sqrt(n2);
        if (n > max_norm && n > 0.0)
            for (double& v : g) v *= max_norm / n;
    }
    return g;
}

TrainResult train(const FusedDataset& data, const TrainConfig& cfg, const NetConfig& net_cfg) {
    if (data.sequences.empty()) throw std::invalid_argument("train: empty dataset");
    NetConfig nc = net_cfg;
    nc.image_size = data.image_size;

    TrainResult out;
    out.policy.net = PolicyNet(nc);
    out.policy.net.init_weights(cfg.seed);
    out.policy.R = data.r;
    out.policy.demo_length = data.demo_length;
    out.policy.zeta_remaining = data.zeta_remaining;
    out.policy.hidden_reset_interval = 2 * data.collected_waypoints;
    out.policy.action_std = compute_action_std(data);
    out.policy.scenario_id = data.scenario_id;

    auto seqs = build_training_sequences(data, out.policy.action_std);
    std::vector<int> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    nn::AdamState adam;
    std::vector<double> momentum_buf;
    std::size_t total_steps = 0;
    for (const auto& s : seqs) total_steps += s.obs.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with our own rng: std::shuffle is not portable
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.next_u64() % i;
            std::swap(order[i - 1], order[j]);
        }
        double epoch_sum = 0.0;
        for (std::size_t base = 0; base < order.size();
             base += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), base + cfg.batch_size);
            std::size_t batch_steps = 0;
            for (std::size_t i = base; i < end; ++i) batch_steps += seqs[order[i]].obs.size();
            out.policy.net.params.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t i = base; i < end; ++i) {
                const TrainSequence& s = seqs[order[i]];
                AugmentParams aug;
                const AugmentParams* augp = nullptr;
                if (cfg.augment_images) {
                    aug.brightness = rng.uniform(-cfg.augment_brightness, cfg.augment_brightness);
                    aug.contrast = 1.0 + rng.uniform(-0.1, 0.1);
                    aug.noise = cfg.augment_noise;
                    aug.noise_seed = rng.next_u64();
                    augp = &aug;
                }
                Tape t(true);
                Bound b = bind(t, out.policy.net.params);
                int l = t.scale(
                    build_sequence_loss(t, nc, b, out.policy.net.params, s, augp),
                    1.0 / static_cast<double>(batch_steps));
                t.backward(l);
                batch_loss += t.value(l)[0];
            }
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch));
            }
            nn::clip_grad_norm(out.policy.net.params, cfg.clip);
            if (cfg.optimizer == TrainConfig::Optimizer::Adam) {
                nn::adam_step(out.policy.net.params, adam, cfg.lr);
            } else {
                nn::sgd_momentum_step(out.policy.net.params, momentum_buf, cfg.lr, cfg.momentum);
            }
            epoch_sum += batch_loss * static_cast<double>(batch_steps);
        }
        out.epoch_loss.push_back(epoch_sum / static_cast<double>(total_steps));
    }
    return out;
}

Action policy_step(const Policy& p, const Observation& obs, std::vector<double>& hidden) {
    if (hidden.empty()) hidden.assign(p.net.cfg.hidden, 0.0);
    auto [actions, h] = forward(p.net, {obs}, hidden);
    hidden = h;
    Action a;
    a.delta.x = actions[0].delta.x * p.action_std[0];
    a.delta.y = actions[0].delta.y * p.action_std[1];
    a.delta.theta = wrap_angle(actions[0].delta.theta * p.action_std[2]);
    a.gripper = actions[0].gripper_logit > 0.0 ? 1 : 0;
    return a;
}

std::vector<double> initial_hidden(const Policy& p) {
    return std::vector<double>(p.net.cfg.hidden, 0.0);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kPolicyFormatVersion = 1;

json net_to_json(const NetConfig& c) {
    return json{{"image_size", c.image_size},
                {"conv1_filters", c.conv1_filters},
                {"conv1_k", c.conv1_k},
                {"conv1_stride", c.conv1_stride},
                {"conv2_filters", c.conv2_filters},
                {"conv2_k", c.conv2_k},
                {"conv2_stride", c.conv2_stride},
                {"img_embed", c.img_embed},
                {"force_hidden", c.force_hidden},
                {"force_embed", c.force_embed},
                {"hidden", c.hidden},
                {"recurrent", c.recurrent},
                {"force_scale", c.force_scale}};
}

NetConfig net_from_json(const json& j) {
    NetConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.conv1_filters = j.at("conv1_filters").get<int>();
    c.conv1_k = j.at("conv1_k").get<int>();
    c.conv1_stride = j.at("conv1_stride").get<int>();
    c.conv2_filters = j.at("conv2_filters").get<int>();
    c.conv2_k = j.at("conv2_k").get<int>();
    c.conv2_stride = j.at("conv2_stride").get<int>();
    c.img_embed = j.at("img_embed").get<int>();
    c.force_hidden = j.at("force_hidden").get<int>();
    c.force_embed = j.at("force_embed").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.recurrent = j.at("recurrent").get<bool>();
    c.force_scale = j.at("force_scale").get<double>();
    return c;
}

void append_bytes(std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

}  // namespace

void save_policy(const Policy& p, const std::string& path, const std::string& inputs_hash) {
    json header;
    header["version"] = kPolicyFormatVersion;
    header["kind"] = "policy";
    header["net"] = net_to_json(p.net.cfg);
    header["R"] = p.R;
    header["demo_length"] = p.demo_length;
    header["hidden_reset_interval"] = p.hidden_reset_interval;
    header["action_std"] = p.action_std;
    header["scenario"] = p.scenario_id;
    header["zeta_len"] = p.zeta_remaining.size();
    header["param_count"] = p.net.params.size();
    header["inputs_hash"] = inputs_hash;
    json views = json::array();
    for (int i = 0; i < p.net.params.view_count(); ++i) {
        const auto& v = p.net.params.view(i);
        views.push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}});
    }
    header["views"] = views;

    std::string buf = header.dump();
    buf.push_back('\n');
    append_bytes(buf, p.net.params.values().data(), p.net.params.size() * sizeof(double));
    for (const auto& a : p.zeta_remaining) {
        double d[3] = {a.delta.x, a.delta.y, a.delta.theta};
        append_bytes(buf, d, sizeof d);
        std::uint8_t g = static_cast<std::uint8_t>(a.gripper);
        append_bytes(buf, &g, 1);
    }
    std::uint32_t crc = crc32(buf.data(), buf.size());
    append_bytes(buf, &crc, sizeof crc);
    atomic_write_file(path, buf);
}

Policy load_policy(const std::string& path) {
    std::string buf = read_file(path);
    if (buf.size() < 5) throw std::runtime_error(path + ": truncated policy file");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc) {
        throw std::runtime_error(path + ": policy file checksum mismatch");
    }
    auto nl = buf.find('\n');
    if (nl == std::string::npos) throw std::runtime_error(path + ": missing policy header");
    json header = json::parse(buf.substr(0, nl));
    if (header.value("version", -1) != kPolicyFormatVersion) {
        throw std::runtime_error(path + ": unsupported policy format version");
    }
    Policy p;
    p.net = PolicyNet(net_from_json(header.at("net")));
    p.R = header.at("R").get<int>();
    p.demo_length = header.at("demo_length").get<int>();
    p.hidden_reset_interval = header.at("hidden_reset_interval").get<int>();
    auto stds = header.at("action_std");
    for (int i = 0; i < 3; ++i) p.action_std[i] = stds.at(i).get<double>();
    p.scenario_id = header.value("scenario", "");

    const json& views = header.at("views");
    if (static_cast<int>(views.size()) != p.net.params.view_count()) {
        throw std::runtime_error(path + ": policy view count mismatch");
    }
    for (int i = 0; i < p.net.params.view_count(); ++i) {
        const auto& v = p.net.params.view(i);
        const json& jv = views.at(i);
        if (jv.at("name") != v.name || jv.at("rows").get<int>() != v.rows ||
            jv.at("cols").get<int>() != v.cols) {
            throw std::runtime_error(path + ": shape mismatch at layer " +
                                     jv.at("name").get<std::string>() + ": file " +
                                     std::to_string(jv.at("rows").get<int>()) + "x" +
                                     std::to_string(jv.at("cols").get<int>()) + " vs expected " +
                                     std::to_string(v.rows) + "x" + std::to_string(v.cols));
        }
    }
    std::size_t param_count = header.at("param_count").get<std::size_t>();
    if (param_count != p.net.params.size()) {
        throw std::runtime_error(path + ": parameter count mismatch");
    }
    std::size_t zeta_len = header.at("zeta_len").get<std::size_t>();
    std::size_t need = nl + 1 + param_count * sizeof(double) + zeta_len * (3 * sizeof(double) + 1) + 4;
    if (buf.size() != need) throw std::runtime_error(path + ": policy payload size mismatch");

    const char* ptr = buf.data() + nl + 1;
    std::memcpy(p.net.params.values().data(), ptr, param_count * sizeof(double));
    ptr += param_count * sizeof(double);
    for (std::size_t i = 0; i < zeta_len; ++i) {
        double d[3];
        std::memcpy(d, ptr, sizeof d);
        ptr += sizeof d;
        std::uint8_t g;
        std::memcpy(&g, ptr, 1);
        ptr += 1;
        p.zeta_remaining.push_back({Pose{d[0], d[1], d[2]}, g});
    }
    return p;
}

std::string policy_inputs_hash(const std::string& path) {
    std::string buf = read_file(path);
    auto nl = buf.find('\n');
    if (nl == std::string::npos) return "";
    json header = json::parse(buf.substr(0, nl));
    return header.value("inputs_hash", "");
}

}  // namespace retrace
