#include "parrot/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "parrot/hash.hpp"

namespace parrot::harness {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

/// Binding of one config field to a (section, key) pair. The same table
/// drives serialization and parsing, which keeps round-trips stable.
struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::vector<Field> field_table() {
    std::vector<Field> f;
    auto add = [&](const std::string& sec, const std::string& key, auto getter, auto setter) {
        f.push_back({sec, key, getter, setter});
    };
    auto d = [](const std::string& v) { return std::stod(v); };
    auto l = [](const std::string& v) { return std::stol(v); };

    add("experiment", "method", [](const ExperimentConfig& c) { return c.method; },
        [](ExperimentConfig& c, const std::string& v) { c.method = v; });
    add("experiment", "task", [](const ExperimentConfig& c) { return c.task; },
        [](ExperimentConfig& c, const std::string& v) { c.task = v; });
    add("experiment", "seeds",
        [](const ExperimentConfig& c) {
            std::string out;
            for (size_t i = 0; i < c.seeds.size(); ++i)
                out += (i ? "," : "") + std::to_string(c.seeds[i]);
            return out;
        },
        [](ExperimentConfig& c, const std::string& v) {
            c.seeds.clear();
            std::stringstream ss(v);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!trim(tok).empty()) c.seeds.push_back(std::stoull(trim(tok)));
        });
    add("experiment", "total_env_steps",
        [](const ExperimentConfig& c) { return std::to_string(c.total_env_steps); },
        [l](ExperimentConfig& c, const std::string& v) { c.total_env_steps = l(v); });
    add("experiment", "eval_period",
        [](const ExperimentConfig& c) { return std::to_string(c.eval_period); },
        [l](ExperimentConfig& c, const std::string& v) { c.eval_period = l(v); });
    add("experiment", "eval_episodes",
        [](const ExperimentConfig& c) { return std::to_string(c.eval_episodes); },
        [l](ExperimentConfig& c, const std::string& v) { c.eval_episodes = l(v); });
    add("experiment", "dataset",
        [](const ExperimentConfig& c) { return c.dataset_path; },
        [](ExperimentConfig& c, const std::string& v) { c.dataset_path = v; });
    add("experiment", "output_dir",
        [](const ExperimentConfig& c) { return c.output_dir; },
        [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; });

    add("world", "objects",
        [](const ExperimentConfig& c) { return std::to_string(c.world.num_objects); },
        [l](ExperimentConfig& c, const std::string& v) { c.world.num_objects = l(v); });
    add("world", "target_index",
        [](const ExperimentConfig& c) { return std::to_string(c.world.target_index); },
        [l](ExperimentConfig& c, const std::string& v) { c.world.target_index = l(v); });
    add("world", "grasp_radius",
        [](const ExperimentConfig& c) { return fmt_double(c.world.grasp_radius); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.grasp_radius = d(v); });
    add("world", "max_step",
        [](const ExperimentConfig& c) { return fmt_double(c.world.max_step); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.max_step = d(v); });
    add("world", "episode_len",
        [](const ExperimentConfig& c) { return std::to_string(c.world.episode_len); },
        [l](ExperimentConfig& c, const std::string& v) { c.world.episode_len = l(v); });
    add("world", "lift_distance",
        [](const ExperimentConfig& c) { return fmt_double(c.world.lift_distance); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.lift_distance = d(v); });
    add("world", "container_cx",
        [](const ExperimentConfig& c) { return fmt_double(c.world.container_cx); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.container_cx = d(v); });
    add("world", "container_cy",
        [](const ExperimentConfig& c) { return fmt_double(c.world.container_cy); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.container_cy = d(v); });
    add("world", "container_hx",
        [](const ExperimentConfig& c) { return fmt_double(c.world.container_hx); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.container_hx = d(v); });
    add("world", "container_hy",
        [](const ExperimentConfig& c) { return fmt_double(c.world.container_hy); },
        [d](ExperimentConfig& c, const std::string& v) { c.world.container_hy = d(v); });
    add("world", "obs_mode",
        [](const ExperimentConfig& c) {
            return std::string(c.world.obs_mode == env::ObsMode::Vector ? "vector" : "grid");
        },
        [](ExperimentConfig& c, const std::string& v) {
            if (v == "vector")
                c.world.obs_mode = env::ObsMode::Vector;
            else if (v == "grid")
                c.world.obs_mode = env::ObsMode::Grid;
            else
                throw std::runtime_error("config: unknown obs_mode '" + v + "'");
        });
    add("world", "grid_cells",
        [](const ExperimentConfig& c) { return std::to_string(c.world.grid_cells); },
        [l](ExperimentConfig& c, const std::string& v) { c.world.grid_cells = l(v); });

    add("collect", "n_keep",
        [](const ExperimentConfig& c) { return std::to_string(c.collect.n_keep); },
        [l](ExperimentConfig& c, const std::string& v) { c.collect.n_keep = l(v); });
    add("collect", "grasp_fraction",
        [](const ExperimentConfig& c) { return fmt_double(c.collect.grasp_fraction); },
        [d](ExperimentConfig& c, const std::string& v) { c.collect.grasp_fraction = d(v); });
    add("collect", "noise_scale",
        [](const ExperimentConfig& c) { return fmt_double(c.collect.noise_scale); },
        [d](ExperimentConfig& c, const std::string& v) { c.collect.noise_scale = d(v); });
    add("collect", "seed",
        [](const ExperimentConfig& c) { return std::to_string(c.collect.seed); },
        [](ExperimentConfig& c, const std::string& v) { c.collect.seed = std::stoull(v); });
    add("collect", "threads",
        [](const ExperimentConfig& c) { return std::to_string(c.collect.threads); },
        [l](ExperimentConfig& c, const std::string& v) { c.collect.threads = l(v); });

    add("flow", "feat_dim",
        [](const ExperimentConfig& c) { return std::to_string(c.flow_feat_dim); },
        [l](ExperimentConfig& c, const std::string& v) { c.flow_feat_dim = l(v); });
    add("flow", "layers",
        [](const ExperimentConfig& c) { return std::to_string(c.flow_layers); },
        [](ExperimentConfig& c, const std::string& v) { c.flow_layers = std::stoi(v); });
    add("flow", "hidden",
        [](const ExperimentConfig& c) { return std::to_string(c.flow_hidden); },
        [l](ExperimentConfig& c, const std::string& v) { c.flow_hidden = l(v); });
    add("flow", "clamp", [](const ExperimentConfig& c) { return fmt_double(c.flow_clamp); },
        [d](ExperimentConfig& c, const std::string& v) { c.flow_clamp = d(v); });
    add("flow", "learning_rate",
        [](const ExperimentConfig& c) { return fmt_double(c.prior.learning_rate); },
        [d](ExperimentConfig& c, const std::string& v) { c.prior.learning_rate = d(v); });
    add("flow", "steps", [](const ExperimentConfig& c) { return std::to_string(c.prior.steps); },
        [l](ExperimentConfig& c, const std::string& v) { c.prior.steps = l(v); });
    add("flow", "batch_size",
        [](const ExperimentConfig& c) { return std::to_string(c.prior.batch_size); },
        [l](ExperimentConfig& c, const std::string& v) { c.prior.batch_size = l(v); });
    add("flow", "validation_fraction",
        [](const ExperimentConfig& c) { return fmt_double(c.prior.validation_fraction); },
        [d](ExperimentConfig& c, const std::string& v) { c.prior.validation_fraction = d(v); });
    add("flow", "train_seed",
        [](const ExperimentConfig& c) { return std::to_string(c.prior.seed); },
        [](ExperimentConfig& c, const std::string& v) { c.prior.seed = std::stoull(v); });

    add("sac", "gamma", [](const ExperimentConfig& c) { return fmt_double(c.sac.gamma); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.gamma = d(v); });
    add("sac", "policy_lr", [](const ExperimentConfig& c) { return fmt_double(c.sac.policy_lr); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.policy_lr = d(v); });
    add("sac", "q_lr", [](const ExperimentConfig& c) { return fmt_double(c.sac.q_lr); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.q_lr = d(v); });
    add("sac", "alpha_lr", [](const ExperimentConfig& c) { return fmt_double(c.sac.alpha_lr); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.alpha_lr = d(v); });
    add("sac", "reward_scale",
        [](const ExperimentConfig& c) { return fmt_double(c.sac.reward_scale); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.reward_scale = d(v); });
    add("sac", "target_update_period",
        [](const ExperimentConfig& c) { return std::to_string(c.sac.target_update_period); },
        [l](ExperimentConfig& c, const std::string& v) { c.sac.target_update_period = l(v); });
    add("sac", "updates_per_step",
        [](const ExperimentConfig& c) { return std::to_string(c.sac.updates_per_step); },
        [l](ExperimentConfig& c, const std::string& v) { c.sac.updates_per_step = l(v); });
    add("sac", "batch_size",
        [](const ExperimentConfig& c) { return std::to_string(c.sac.batch_size); },
        [l](ExperimentConfig& c, const std::string& v) { c.sac.batch_size = l(v); });
    add("sac", "hidden_units",
        [](const ExperimentConfig& c) { return std::to_string(c.sac.hidden_units); },
        [l](ExperimentConfig& c, const std::string& v) { c.sac.hidden_units = l(v); });
    add("sac", "auto_entropy",
        [](const ExperimentConfig& c) { return std::string(c.sac.auto_entropy ? "true" : "false"); },
        [](ExperimentConfig& c, const std::string& v) { c.sac.auto_entropy = v == "true"; });
    add("sac", "init_alpha",
        [](const ExperimentConfig& c) { return fmt_double(c.sac.init_alpha); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.init_alpha = d(v); });
    add("sac", "warmup_steps",
        [](const ExperimentConfig& c) { return std::to_string(c.sac.warmup_steps); },
        [l](ExperimentConfig& c, const std::string& v) { c.sac.warmup_steps = l(v); });
    add("sac", "replay_capacity",
        [](const ExperimentConfig& c) { return std::to_string(c.sac.replay_capacity); },
        [l](ExperimentConfig& c, const std::string& v) { c.sac.replay_capacity = l(v); });
    add("sac", "latent_clip",
        [](const ExperimentConfig& c) { return fmt_double(c.sac.latent_clip); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.latent_clip = d(v); });
    add("sac", "latent_penalty",
        [](const ExperimentConfig& c) { return fmt_double(c.sac.latent_penalty); },
        [d](ExperimentConfig& c, const std::string& v) { c.sac.latent_penalty = d(v); });

    add("bc", "learning_rate",
        [](const ExperimentConfig& c) { return fmt_double(c.bc.learning_rate); },
        [d](ExperimentConfig& c, const std::string& v) { c.bc.learning_rate = d(v); });
    add("bc", "steps", [](const ExperimentConfig& c) { return std::to_string(c.bc.steps); },
        [l](ExperimentConfig& c, const std::string& v) { c.bc.steps = l(v); });
    add("bc", "batch_size",
        [](const ExperimentConfig& c) { return std::to_string(c.bc.batch_size); },
        [l](ExperimentConfig& c, const std::string& v) { c.bc.batch_size = l(v); });
    add("bc", "entropy_weight",
        [](const ExperimentConfig& c) { return fmt_double(c.bc.entropy_weight); },
        [d](ExperimentConfig& c, const std::string& v) { c.bc.entropy_weight = d(v); });

    add("cvae", "learning_rate",
        [](const ExperimentConfig& c) { return fmt_double(c.cvae.learning_rate); },
        [d](ExperimentConfig& c, const std::string& v) { c.cvae.learning_rate = d(v); });
    add("cvae", "steps", [](const ExperimentConfig& c) { return std::to_string(c.cvae.steps); },
        [l](ExperimentConfig& c, const std::string& v) { c.cvae.steps = l(v); });
    add("cvae", "batch_size",
        [](const ExperimentConfig& c) { return std::to_string(c.cvae.batch_size); },
        [l](ExperimentConfig& c, const std::string& v) { c.cvae.batch_size = l(v); });
    add("cvae", "beta_target",
        [](const ExperimentConfig& c) { return fmt_double(c.cvae.beta_target); },
        [d](ExperimentConfig& c, const std::string& v) { c.cvae.beta_target = d(v); });
    add("cvae", "beta_half_step",
        [](const ExperimentConfig& c) { return fmt_double(c.cvae.beta_half_step); },
        [d](ExperimentConfig& c, const std::string& v) { c.cvae.beta_half_step = d(v); });

    add("prior_explore", "eps",
        [](const ExperimentConfig& c) { return fmt_double(c.explore_eps); },
        [d](ExperimentConfig& c, const std::string& v) { c.explore_eps = d(v); });
    return f;
}

} // namespace

std::string ExperimentConfig::serialize() const {
    auto fields = field_table();
    std::string out;
    std::string cur_section;
    for (const auto& f : fields) {
        if (f.section != cur_section) {
            if (!out.empty()) out += "\n";
            out += "[" + f.section + "]\n";
            cur_section = f.section;
        }
        out += f.key + " = " + f.get(*this) + "\n";
    }
    return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    auto fields = field_table();
    std::map<std::pair<std::string, std::string>, const Field*> index;
    for (const auto& f : fields) index[{f.section, f.key}] = &f;

    std::istringstream is(text);
    std::string line, section;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error("config: malformed section at line " +
                                         std::to_string(line_no));
            section = t.substr(1, t.size() - 2);
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " +
                                     std::to_string(line_no));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        auto it = index.find({section, key});
        if (it == index.end())
            throw std::runtime_error("config: unknown key '" + section + "." + key + "'");
        it->second->set(cfg, value);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("config: cannot write " + path);
    os << serialize();
}

std::string ExperimentConfig::config_hash() const { return hex64(fnv1a(serialize())); }

env::WorldSpec ExperimentConfig::world_for_task() const {
    env::WorldSpec w = world;
    if (task == "grasp")
        w.kind = env::TaskKind::Grasp;
    else if (task == "pickplace")
        w.kind = env::TaskKind::PickPlace;
    else
        throw std::runtime_error("config: unknown task '" + task + "'");
    return w;
}

rl::RunConfig ExperimentConfig::run_config(uint64_t seed) const {
    rl::RunConfig rc;
    rc.world = world_for_task();
    rc.sac = sac;
    rc.total_env_steps = total_env_steps;
    rc.eval_period = eval_period;
    rc.eval_episodes = eval_episodes;
    rc.seed = seed;
    return rc;
}

} // namespace parrot::harness
