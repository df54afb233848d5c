#include "retrace/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "retrace/util.hpp"

namespace retrace {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

struct Setter {
    std::function<void(RunConfig&, const std::string&)> apply;
};

template <typename T>
T parse_num(const std::string& path, const std::string& v);

template <>
double parse_num<double>(const std::string& path, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected a number, got '" + v + "'");
    }
}

template <>
int parse_num<int>(const std::string& path, const std::string& v) {
    try {
        std::size_t pos = 0;
        int i = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected an integer, got '" + v + "'");
    }
}

template <>
std::uint64_t parse_num<std::uint64_t>(const std::string& path, const std::string& v) {
    try {
        std::size_t pos = 0;
        std::uint64_t i = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected an unsigned integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& path, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(path, "expected a bool, got '" + v + "'");
}

using KeyMap = std::map<std::string, Setter>;

const std::map<std::string, KeyMap>& schema() {
    static const std::map<std::string, KeyMap> s = [] {
        std::map<std::string, KeyMap> m;
        auto D = [](auto member) {  // double field
            return Setter{[member](RunConfig& c, const std::string& v) {
                std::invoke(member, c) = parse_num<double>("", v);
            }};
        };
        (void)D;
        auto set = [&m](const std::string& sec, const std::string& key,
                        std::function<void(RunConfig&, const std::string&, const std::string&)> f) {
            m[sec][key] = Setter{[f, sec, key](RunConfig& c, const std::string& v) {
                f(c, sec + "." + key, v);
            }};
        };

        set("run", "scenario", [](RunConfig& c, const std::string&, const std::string& v) {
            c.scenario = v;
            c.eval.scenario = v;
        });
        set("run", "seed", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.seed = parse_num<std::uint64_t>(p, v);
            c.collector.seed = c.seed;
            c.train.seed = c.seed;
        });
        set("run", "out",
            [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; });

        set("sim", "image_size", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.sim.image_size = parse_num<int>(p, v);
        });
        set("sim", "view_half", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.sim.view_half = parse_num<double>(p, v);
        });
        set("sim", "substeps", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.sim.substeps = parse_num<int>(p, v);
        });
        set("sim", "k_trans", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.sim.k_trans = parse_num<double>(p, v);
        });
        set("sim", "k_rot", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.sim.k_rot = parse_num<double>(p, v);
        });
        set("sim", "max_force", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.sim.max_force = parse_num<double>(p, v);
        });
        set("sim", "render_noise_sigma",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.sim.render_noise_sigma = parse_num<double>(p, v);
            });

        set("collector", "z", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.collector.z = parse_num<int>(p, v);
        });
        set("collector", "trans_range",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.trans_range = parse_num<double>(p, v);
            });
        set("collector", "rot_range", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.collector.rot_range = parse_num<double>(p, v);
        });
        set("collector", "theta", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.collector.theta = parse_num<double>(p, v);
        });
        set("collector", "pose_tol_trans",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.pose_tol.trans_tol = parse_num<double>(p, v);
            });
        set("collector", "pose_tol_rot",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.pose_tol.rot_tol = parse_num<double>(p, v);
            });
        set("collector", "max_ticks_per_traj",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.max_ticks_per_traj = parse_num<int>(p, v);
            });
        set("collector", "return_step",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.return_step = parse_num<double>(p, v);
            });
        set("collector", "max_attempts_per_waypoint",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.max_attempts_per_waypoint = parse_num<int>(p, v);
            });
        set("collector", "force_limit",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.force_limit = parse_num<double>(p, v);
            });
        set("collector", "sequential",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.sequential = parse_bool(p, v);
            });
        set("collector", "check_reachability",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.check_reachability = parse_bool(p, v);
            });
        set("collector", "check_disturbance",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.check_disturbance = parse_bool(p, v);
            });
        set("collector", "scripted_disturb_waypoint",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.scripted_disturb_waypoint = parse_num<int>(p, v);
            });
        set("collector", "scripted_disturb_object",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.scripted_disturb_object = parse_num<int>(p, v);
            });
        set("collector", "scripted_disturb_dx",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.scripted_disturb_dx = parse_num<double>(p, v);
            });
        set("collector", "scripted_disturb_dy",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.scripted_disturb_dy = parse_num<double>(p, v);
            });
        set("collector", "patch_size",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.collector.extractor.patch_size = parse_num<int>(p, v);
            });

        set("train", "lr", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.train.lr = parse_num<double>(p, v);
        });
        set("train", "batch_size", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.train.batch_size = parse_num<int>(p, v);
        });
        set("train", "epochs", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.train.epochs = parse_num<int>(p, v);
        });
        set("train", "clip", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.train.clip = parse_num<double>(p, v);
        });
        set("train", "optimizer", [](RunConfig& c, const std::string& p, const std::string& v) {
            if (v == "adam") c.train.optimizer = TrainConfig::Optimizer::Adam;
            else if (v == "sgd-momentum") c.train.optimizer = TrainConfig::Optimizer::SgdMomentum;
            else throw ConfigError(p, "optimizer must be adam or sgd-momentum");
        });
        set("train", "momentum", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.train.momentum = parse_num<double>(p, v);
        });
        set("train", "augment_images",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.train.augment_images = parse_bool(p, v);
            });

        set("net", "hidden", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.hidden = parse_num<int>(p, v);
        });
        set("net", "img_embed", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.img_embed = parse_num<int>(p, v);
        });
        set("net", "force_embed", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.force_embed = parse_num<int>(p, v);
        });
        set("net", "force_hidden", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.force_hidden = parse_num<int>(p, v);
        });
        set("net", "recurrent", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.recurrent = parse_bool(p, v);
        });
        set("net", "conv1_filters", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.conv1_filters = parse_num<int>(p, v);
        });
        set("net", "conv2_filters", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.conv2_filters = parse_num<int>(p, v);
        });
        set("net", "force_scale", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.net.force_scale = parse_num<double>(p, v);
        });

        set("deploy", "identity_eps_trans",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.deploy.identity_eps_trans = parse_num<double>(p, v);
            });
        set("deploy", "identity_eps_rot",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.deploy.identity_eps_rot = parse_num<double>(p, v);
            });
        set("deploy", "identity_consecutive",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.deploy.identity_consecutive = parse_num<int>(p, v);
            });
        set("deploy", "timeout_ticks",
            [](RunConfig& c, const std::string& p, const std::string& v) {
                c.deploy.timeout_ticks = parse_num<int>(p, v);
            });

        set("eval", "trials", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.eval.trials = parse_num<int>(p, v);
        });
        set("eval", "rand_trans", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.eval.rand_trans = parse_num<double>(p, v);
        });
        set("eval", "rand_rot", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.eval.rand_rot = parse_num<double>(p, v);
        });
        set("eval", "seed_base", [](RunConfig& c, const std::string& p, const std::string& v) {
            c.eval.seed_base = parse_num<std::uint64_t>(p, v);
        });
        return m;
    }();
    return s;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (!schema().count(section)) {
                throw ConfigError(section, "unknown config section");
            }
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(section + ".?", "expected key=value at line " +
                                                  std::to_string(lineno));
        }
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (section.empty()) throw ConfigError(key, "key outside any [section]");
        const auto& keys = schema().at(section);
        auto it = keys.find(key);
        if (it == keys.end()) {
            throw ConfigError(section + "." + key, "unknown config key");
        }
        it->second.apply(cfg, val);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config_text(read_file(path));
}

std::string dump_run_config(const RunConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "[run]\nscenario=" << c.scenario << "\nseed=" << c.seed << "\nout=" << c.out << "\n";
    o << "[sim]\nimage_size=" << c.sim.image_size << "\nview_half=" << c.sim.view_half
      << "\nsubsteps=" << c.sim.substeps << "\nk_trans=" << c.sim.k_trans
      << "\nk_rot=" << c.sim.k_rot << "\nmax_force=" << c.sim.max_force
      << "\nrender_noise_sigma=" << c.sim.render_noise_sigma << "\n";
    o << "[collector]\nz=" << c.collector.z << "\ntrans_range=" << c.collector.trans_range
      << "\nrot_range=" << c.collector.rot_range << "\ntheta=" << c.collector.theta
      << "\npose_tol_trans=" << c.collector.pose_tol.trans_tol
      << "\npose_tol_rot=" << c.collector.pose_tol.rot_tol
      << "\nmax_ticks_per_traj=" << c.collector.max_ticks_per_traj
      << "\nreturn_step=" << c.collector.return_step
      << "\nmax_attempts_per_waypoint=" << c.collector.max_attempts_per_waypoint
      << "\nforce_limit=" << c.collector.force_limit
      << "\nsequential=" << c.collector.sequential
      << "\ncheck_reachability=" << c.collector.check_reachability
      << "\ncheck_disturbance=" << c.collector.check_disturbance
      << "\nscripted_disturb_waypoint=" << c.collector.scripted_disturb_waypoint
      << "\npatch_size=" << c.collector.extractor.patch_size << "\n";
    o << "[train]\nlr=" << c.train.lr << "\nbatch_size=" << c.train.batch_size
      << "\nepochs=" << c.train.epochs << "\nclip=" << c.train.clip << "\noptimizer="
      << (c.train.optimizer == TrainConfig::Optimizer::Adam ? "adam" : "sgd-momentum")
      << "\naugment_images=" << c.train.augment_images << "\n";
    o << "[net]\nhidden=" << c.net.hidden << "\nimg_embed=" << c.net.img_embed
      << "\nforce_embed=" << c.net.force_embed << "\nforce_hidden=" << c.net.force_hidden
      << "\nrecurrent=" << c.net.recurrent << "\nconv1_filters=" << c.net.conv1_filters
      << "\nconv2_filters=" << c.net.conv2_filters << "\nforce_scale=" << c.net.force_scale
      << "\n";
    o << "[deploy]\nidentity_eps_trans=" << c.deploy.identity_eps_trans
      << "\nidentity_eps_rot=" << c.deploy.identity_eps_rot
      << "\nidentity_consecutive=" << c.deploy.identity_consecutive
      << "\ntimeout_ticks=" << c.deploy.timeout_ticks << "\n";
    o << "[eval]\ntrials=" << c.eval.trials << "\nrand_trans=" << c.eval.rand_trans
      << "\nrand_rot=" << c.eval.rand_rot << "\nseed_base=" << c.eval.seed_base << "\n";
    return o.str();
}

std::string run_config_hash(const RunConfig& cfg) {
    return hash_hex(fnv1a64(dump_run_config(cfg)));
}

}  // namespace retrace
