#include "retrace/harness.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "retrace/util.hpp"

namespace retrace {

namespace {

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

void finalize(Report& r) {
    r.trials = static_cast<int>(r.rows.size());
    r.successes = 0;
    double ticks = 0.0;
    for (const auto& row : r.rows) {
        r.successes += row.success ? 1 : 0;
        ticks += row.ticks;
    }
    r.rate = r.trials > 0 ? static_cast<double>(r.successes) / r.trials : 0.0;
    r.mean_ticks = r.trials > 0 ? ticks / r.trials : 0.0;
}

// Run one episode per trial index across a small worker pool; rows land at
// their trial index, so the report is independent of scheduling.
template <typename EpisodeFn>
std::vector<TrialRow> run_trials(const EvalSpec& spec, EpisodeFn fn) {
    if (spec.trials < 1) throw std::invalid_argument("eval spec: trials must be >= 1");
    std::vector<TrialRow> rows(spec.trials);
    std::atomic<int> next{0};
    unsigned workers = std::min(std::thread::hardware_concurrency(), 4u);
    if (workers < 1) workers = 1;
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= spec.trials) return;
            std::uint64_t seed = spec.seed_base + static_cast<std::uint64_t>(i);
            World w = reset(spec.scenario, seed, {spec.rand_trans, spec.rand_rot});
            EpisodeResult e = fn(w);
            rows[i] = {i, seed, e.success, static_cast<int>(e.trace.size()),
                       to_string(e.switched_by)};
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Report I/O
// ---------------------------------------------------------------------------

std::string Report::to_csv() const {
    std::ostringstream out;
    out << "method,scenario,trials,successes,rate,mean_ticks,config_hash\n";
    out << method << "," << scenario << "," << trials << "," << successes << ","
        << fmt_double(rate) << "," << fmt_double(mean_ticks) << "," << config_hash << "\n";
    out << "trial,seed,success,ticks,switched_by\n";
    for (const auto& r : rows) {
        out << r.trial << "," << r.seed << "," << (r.success ? 1 : 0) << "," << r.ticks << ","
            << r.switched_by << "\n";
    }
    return out.str();
}

Report Report::from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                out.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        out.push_back(cur);
        return out;
    };
    Report r;
    if (!std::getline(in, line)) throw std::runtime_error("empty report csv");
    if (!std::getline(in, line)) throw std::runtime_error("report csv missing summary row");
    auto f = split(line);
    if (f.size() != 7) throw std::runtime_error("report csv: bad summary row");
    r.method = f[0];
    r.scenario = f[1];
    r.trials = std::stoi(f[2]);
    r.successes = std::stoi(f[3]);
    r.rate = std::stod(f[4]);
    r.mean_ticks = std::stod(f[5]);
    r.config_hash = f[6];
    std::getline(in, line);  // trial header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t = split(line);
        if (t.size() != 5) throw std::runtime_error("report csv: bad trial row");
        r.rows.push_back({std::stoi(t[0]), std::stoull(t[1]), t[2] == "1", std::stoi(t[3]), t[4]});
    }
    return r;
}

std::string markdown_table(const std::vector<Report>& reports) {
    std::map<std::string, std::map<std::string, double>> by_method;
    std::vector<std::string> methods, scenarios;
    for (const auto& r : reports) {
        if (!by_method.count(r.method)) methods.push_back(r.method);
        if (by_method[r.method].emplace(r.scenario, r.rate).second) {
            bool known = false;
            for (const auto& s : scenarios) known = known || s == r.scenario;
            if (!known) scenarios.push_back(r.scenario);
        }
    }
    std::ostringstream out;
    out << "| Method |";
    for (const auto& s : scenarios) out << " " << s << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < scenarios.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& m : methods) {
        out << "| " << m << " |";
        for (const auto& s : scenarios) {
            auto it = by_method[m].find(s);
            if (it == by_method[m].end()) {
                out << " - |";
            } else {
                out << " " << static_cast<int>(std::lround(it->second * 100.0)) << "% |";
            }
        }
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Evaluation and baselines
// ---------------------------------------------------------------------------

Report evaluate(const Policy& pi, const EvalSpec& spec, const DeployConfig& dcfg) {
    Report r;
    r.method = "pipeline";
    r.scenario = spec.scenario;
    r.config_hash = hash_hex(fnv1a64(spec.scenario + "|" + std::to_string(spec.seed_base) + "|" +
                                     std::to_string(spec.trials)));
    r.rows = run_trials(spec, [&](World& w) { return deploy(pi, w, dcfg); });
    finalize(r);
    return r;
}

Report baseline_demo_replay(const Demonstration& demo, const EvalSpec& spec) {
    Report r;
    r.method = "demo_replay";
    r.scenario = spec.scenario;
    r.config_hash = hash_hex(fnv1a64("demo_replay|" + std::to_string(spec.seed_base)));
    r.rows = run_trials(spec, [&](World& w) {
        EpisodeResult e;
        for (const auto& s : demo.steps) {
            step_delta(w, s.action.delta, s.action.gripper != 0);
            e.trace.push_back({0, w.ee_pose, s.action, 0.0, false});
        }
        e.success = success_predicate(w);
        e.switched_by = SwitchedBy::NotApplicable;
        return e;
    });
    finalize(r);
    return r;
}

namespace {

double image_l2(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        s += d * d;
    }
    return s;
}

}  // namespace

Report baseline_pose_replay(const CollectionResult& result, const Demonstration& demo,
                            const EvalSpec& spec, double injected_residual) {
    // Relabel every dataset observation with the relative pose from its
    // waypoint to the demo's initial pose.
    struct Entry {
        const Image* img;
        Pose to_start;
    };
    std::vector<Entry> entries;
    const Pose start = demo.steps[0].waypoint;
    for (const auto& t : result.dataset) {
        for (const auto& s : t.steps) {
            entries.push_back({&s.obs.image, relative(s.waypoint, start)});
        }
    }
    for (const auto& s : demo.steps) {
        entries.push_back({&s.obs.image, relative(s.waypoint, start)});
    }

    Report r;
    r.method = "pose_replay";
    r.scenario = spec.scenario;
    r.config_hash = hash_hex(fnv1a64("pose_replay|" + std::to_string(injected_residual)));
    r.rows = run_trials(spec, [&](World& w) {
        EpisodeResult e;
        // visual servoing toward the demo's initial pose
        for (int round = 0; round < 12; ++round) {
            Image live = render(w);
            double best = 1e300;
            const Entry* match = &entries.front();
            for (const auto& entry : entries) {
                double d = image_l2(live, *entry.img);
                if (d < best) {
                    best = d;
                    match = &entry;
                }
            }
            Pose est = match->to_start;
            est.x += injected_residual;
            if (std::hypot(est.x, est.y) < 2e-3 && std::abs(est.theta) < 0.01) break;
            // execute the estimated move as clamped ticks
            int ticks = std::max(1, static_cast<int>(std::ceil(std::hypot(est.x, est.y) / 0.008)));
            for (int i = 0; i < ticks; ++i) {
                Pose frac{est.x / ticks, est.y / ticks, est.theta / ticks};
                step_delta(w, frac, false);
                e.trace.push_back({0, w.ee_pose, {frac, 0}, 0.0, true});
            }
        }
        for (const auto& s : demo.steps) {
            step_delta(w, s.action.delta, s.action.gripper != 0);
            e.trace.push_back({0, w.ee_pose, s.action, 0.0, false});
        }
        e.success = success_predicate(w);
        e.switched_by = SwitchedBy::NotApplicable;
        return e;
    });
    finalize(r);
    return r;
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

AblationMode ablation_mode_from_string(const std::string& s) {
    if (s == "no-sequence") return AblationMode::NoSequence;
    if (s == "no-disturbance") return AblationMode::NoDisturbance;
    if (s == "no-reachability") return AblationMode::NoReachability;
    if (s == "no-memory") return AblationMode::NoMemory;
    if (s == "data-fraction") return AblationMode::DataFraction;
    throw std::invalid_argument("unknown ablation mode: " + s);
}

std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::NoSequence: return "no-sequence";
        case AblationMode::NoDisturbance: return "no-disturbance";
        case AblationMode::NoReachability: return "no-reachability";
        case AblationMode::NoMemory: return "no-memory";
        case AblationMode::DataFraction: return "data-fraction";
    }
    return "?";
}

CollectionResult relabel_no_reachability(const CollectionResult& result,
                                         const Demonstration& demo, double step_len) {
    CollectionResult out = result;
    for (auto& t : out.dataset) {
        Pose prev = t.start_pose;
        for (auto& s : t.steps) {
            // nearest demo waypoint by translation distance
            double best = 1e300;
            Pose nearest = demo.steps[0].waypoint;
            for (const auto& d : demo.steps) {
                double dist = translation_distance(prev, d.waypoint);
                if (dist < best) {
                    best = dist;
                    nearest = d.waypoint;
                }
            }
            Pose rel = relative(prev, nearest);
            double n = std::hypot(rel.x, rel.y);
            if (n > step_len) {
                rel.x *= step_len / n;
                rel.y *= step_len / n;
            }
            rel.theta = std::clamp(rel.theta, -0.05, 0.05);
            s.action.delta = rel;
            prev = s.waypoint;
        }
    }
    return out;
}

FusedDataset subsample_fraction(const FusedDataset& data, double fraction, std::uint64_t seed) {
    const double valid[] = {0.25, 0.5, 0.75, 1.0};
    bool ok = false;
    for (double v : valid) ok = ok || std::abs(fraction - v) < 1e-9;
    if (!ok) throw std::invalid_argument("data fraction must be one of 0.25, 0.5, 0.75, 1.0");
    if (fraction == 1.0) return data;

    FusedDataset out = data;
    out.sequences.clear();
    out.sequences.push_back(data.sequences.front());  // the demo entry stays
    std::size_t n_aug = data.sequences.size() - 1;
    std::size_t keep = static_cast<std::size_t>(std::ceil(fraction * n_aug));
    std::vector<std::size_t> idx(n_aug);
    for (std::size_t i = 0; i < n_aug; ++i) idx[i] = i + 1;
    Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = rng.next_u64() % i;
        std::swap(idx[i - 1], idx[j]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.sequences.push_back(data.sequences[i]);
    return out;
}

Report run_ablation(AblationMode mode, const AblationSetup& setup, const EvalSpec& spec) {
    FusedDataset data;
    NetConfig net = setup.net;
    switch (mode) {
        case AblationMode::NoSequence: {
            CollectorConfig cc = setup.collector;
            cc.sequential = false;
            World w = reset(setup.demo.scenario_id, setup.demo.seed, RandomizationSpec::none());
            CollectionResult res = collect(w, setup.demo, cc);
            data = fuse(res, setup.demo);
            break;
        }
        case AblationMode::NoDisturbance: {
            CollectorConfig cc = setup.collector;
            cc.check_disturbance = false;
            World w = reset(setup.demo.scenario_id, setup.demo.seed, RandomizationSpec::none());
            CollectionResult res = collect(w, setup.demo, cc);
            data = fuse(res, setup.demo);
            break;
        }
        case AblationMode::NoReachability: {
            CollectionResult relabeled =
                relabel_no_reachability(setup.main_result, setup.demo, setup.collector.return_step);
            data = fuse(relabeled, setup.demo);
            break;
        }
        case AblationMode::NoMemory: {
            net.recurrent = false;
            data = fuse(setup.main_result, setup.demo);
            break;
        }
        case AblationMode::DataFraction: {
            data = subsample_fraction(fuse(setup.main_result, setup.demo), setup.fraction,
                                      setup.train.seed ^ 0x5bf03635u);
            break;
        }
    }
    TrainResult tr = train(data, setup.train, net);
    Report r = evaluate(tr.policy, spec, setup.deploy);
    r.method = to_string(mode);
    if (mode == AblationMode::DataFraction) {
        std::ostringstream m;
        m << "data-fraction(" << setup.fraction << ")";
        r.method = m.str();
    }
    return r;
}

}  // namespace retrace
