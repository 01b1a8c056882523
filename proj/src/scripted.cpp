#include "parrot/scripted.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "parrot/hash.hpp"

namespace parrot::scripted {

namespace {

constexpr double kReachThreshold = 0.02; // distance threshold of the scripts

double clip1(double v) { return std::min(1.0, std::max(-1.0, v)); }

using scripted::kGripClose;
using scripted::kGripOpen;

/// Move action whose deterministic part is proportional to the offset,
/// saturating at full speed.
void move_toward(env::EnvAction& a, const env::Vec2& from, const env::Vec2& to,
                 double max_step) {
    a.dx = clip1((to.x - from.x) / max_step);
    a.dy = clip1((to.y - from.y) / max_step);
}

env::EnvAction grasp_core(const env::WorldState& state, const env::WorldSpec& spec) {
    env::EnvAction a;
    const long tgt = spec.target_index;
    const env::Vec2 target = state.objects[static_cast<size_t>(tgt)];
    const double d = std::hypot(target.x - state.gripper.x, target.y - state.gripper.y);
    const bool holding_target = state.held == tgt;

    if (d > kReachThreshold) {
        move_toward(a, state.gripper, target, spec.max_step);
        a.grip = holding_target ? kGripClose : kGripOpen;
    } else if (state.gripper_open) {
        a.grip = kGripClose;
    } else if (!holding_target) {
        a.grip = kGripOpen; // closed on nothing (or the wrong object); retry
    } else if (!state.lifted[static_cast<size_t>(tgt)]) {
        // drag away from the spawn point at full speed
        const env::Vec2 spawn = state.spawns[static_cast<size_t>(tgt)];
        double ux = target.x - spawn.x, uy = target.y - spawn.y;
        if (std::hypot(ux, uy) < 1e-9) {
            ux = 0.5 - spawn.x;
            uy = 0.5 - spawn.y;
        }
        if (std::hypot(ux, uy) < 1e-9) {
            ux = 0.0;
            uy = 1.0;
        }
        double m = std::max(std::abs(ux), std::abs(uy));
        a.dx = ux / m;
        a.dy = uy / m;
        a.grip = kGripClose;
    } else {
        a.grip = kGripClose; // hold the lifted object in place
    }
    return a;
}

void add_noise(env::EnvAction& a, nd::Rng& rng, double noise_scale) {
    if (noise_scale <= 0.0) return;
    a.dx += rng.normal(0.0, noise_scale);
    a.dy += rng.normal(0.0, noise_scale);
    a.grip += rng.normal(0.0, noise_scale);
}

} // namespace

env::EnvAction scripted_grasp(const env::WorldState& state, const env::WorldSpec& spec,
                              nd::Rng& rng, double noise_scale) {
    env::EnvAction a = grasp_core(state, spec);
    add_noise(a, rng, noise_scale);
    return a;
}

env::EnvAction scripted_pick_place(const env::WorldState& state, const env::WorldSpec& spec,
                                   bool& place_attempted, nd::Rng& rng, double noise_scale) {
    env::EnvAction a;
    const env::Vec2 drop{spec.container_cx, spec.container_cy};
    const double drop_dist =
        std::hypot(drop.x - state.gripper.x, drop.y - state.gripper.y);
    const bool holding_target = state.held == spec.target_index;

    if (place_attempted) {
        // zero action; grip <= 0 keeps the gripper open
    } else if (!holding_target && drop_dist > kReachThreshold) {
        a = grasp_core(state, spec);
    } else if (drop_dist > kReachThreshold) {
        move_toward(a, state.gripper, drop, spec.max_step);
        a.grip = kGripClose;
    } else {
        a.grip = kGripOpen; // open once
        place_attempted = true;
    }
    add_noise(a, rng, noise_scale);
    return a;
}

bool keep_filter(const env::WorldState& final_state, const env::WorldSpec& spec) {
    if (final_state.held >= 0 && final_state.lifted[static_cast<size_t>(final_state.held)])
        return true;
    if (spec.has_container()) {
        for (long k = 0; k < spec.num_objects; ++k) {
            if (k == final_state.held) continue;
            const env::Vec2& p = final_state.objects[static_cast<size_t>(k)];
            if (std::abs(p.x - spec.container_cx) <= spec.container_hx &&
                std::abs(p.y - spec.container_cy) <= spec.container_hy)
                return true;
        }
    }
    return false;
}

void Dataset::to_matrices(nd::Tensor& obs, nd::Tensor& act) const {
    const long n = pair_count();
    obs = nd::Tensor(std::vector<long>{n, obs_dim});
    act = nd::Tensor(std::vector<long>{n, act_dim});
    long row = 0;
    for (const auto& t : trajectories) {
        std::copy(t.obs.begin(), t.obs.end(), obs.data() + row * obs_dim);
        std::copy(t.act.begin(), t.act.end(), act.data() + row * act_dim);
        row += t.steps;
    }
}

namespace {

struct EpisodeOutcome {
    bool kept = false;
    Trajectory traj;
};

EpisodeOutcome run_episode(const CollectConfig& cfg, uint64_t episode_index) {
    EpisodeOutcome out;

    nd::Rng script_rng(nd::Rng::derive(cfg.seed, {0x5c31u, episode_index}));
    env::WorldSpec spec = cfg.proto;
    spec.kind = script_rng.uniform01() < cfg.grasp_fraction ? env::TaskKind::Grasp
                                                            : env::TaskKind::PickPlace;
    spec.target_index =
        static_cast<long>(script_rng.uniform_int(static_cast<uint64_t>(spec.num_objects)));
    const uint64_t env_seed = nd::Rng::derive(cfg.seed, {0xe41u, episode_index});

    auto [state, obs] = env::reset(spec, env_seed);
    const long S = spec.obs_dim();

    Trajectory traj;
    traj.kind = spec.kind;
    traj.seed = env_seed;
    traj.obs.reserve(static_cast<size_t>(spec.episode_len * S));
    traj.act.reserve(static_cast<size_t>(spec.episode_len * 3));

    bool place_attempted = false;
    for (long t = 0; t < spec.episode_len; ++t) {
        env::EnvAction a =
            spec.kind == env::TaskKind::Grasp
                ? scripted_grasp(state, spec, script_rng, cfg.noise_scale)
                : scripted_pick_place(state, spec, place_attempted, script_rng,
                                      cfg.noise_scale);
        // stored actions are the clipped values actually applied
        a.dx = clip1(a.dx);
        a.dy = clip1(a.dy);
        a.grip = clip1(a.grip);

        traj.obs.insert(traj.obs.end(), obs.begin(), obs.end());
        traj.act.push_back(a.dx);
        traj.act.push_back(a.dy);
        traj.act.push_back(a.grip);

        state = env::step_dynamics(state, a, spec);
        obs = env::observe(state, spec);
    }
    traj.steps = spec.episode_len;
    traj.success = keep_filter(state, spec);

    out.kept = traj.success;
    out.traj = std::move(traj);
    return out;
}

} // namespace

Dataset collect_dataset(const CollectConfig& cfg, CollectStats* stats) {
    if (cfg.n_keep < 1) throw std::runtime_error("collect_dataset: n_keep must be >= 1");
    if (cfg.grasp_fraction < 0.0 || cfg.grasp_fraction > 1.0)
        throw std::runtime_error("collect_dataset: task mix fraction must be in [0, 1]");
    cfg.proto.validate();

    Dataset ds;
    ds.obs_dim = cfg.proto.obs_dim();
    ds.act_dim = 3;
    ds.episode_len = cfg.proto.episode_len;

    // Episodes are indexed and evaluated in blocks; keepers are taken in
    // index order, so the result does not depend on the thread count.
    const long threads = std::max<long>(1, cfg.threads);
    const long block = 512;
    uint64_t next_index = 0;
    long attempts = 0; // index of the episode that produced the last keeper, plus one

    while (static_cast<long>(ds.trajectories.size()) < cfg.n_keep) {
        std::vector<EpisodeOutcome> outcomes(static_cast<size_t>(block));
        if (threads == 1) {
            for (long i = 0; i < block; ++i)
                outcomes[static_cast<size_t>(i)] = run_episode(cfg, next_index + i);
        } else {
            std::atomic<long> cursor{0};
            std::vector<std::thread> pool;
            for (long w = 0; w < threads; ++w)
                pool.emplace_back([&] {
                    while (true) {
                        long i = cursor.fetch_add(1);
                        if (i >= block) return;
                        outcomes[static_cast<size_t>(i)] = run_episode(cfg, next_index + i);
                    }
                });
            for (auto& th : pool) th.join();
        }

        for (long i = 0; i < block; ++i) {
            auto& o = outcomes[static_cast<size_t>(i)];
            if (o.kept) {
                ds.trajectories.push_back(std::move(o.traj));
                attempts = static_cast<long>(next_index) + i + 1;
                if (static_cast<long>(ds.trajectories.size()) == cfg.n_keep) break;
            }
        }
        next_index += static_cast<uint64_t>(block);

        long seen = static_cast<long>(next_index);
        if (static_cast<long>(ds.trajectories.size()) < cfg.n_keep && seen >= 10000 &&
            static_cast<double>(ds.trajectories.size()) < 0.01 * static_cast<double>(seen))
            throw std::runtime_error(
                "collect_dataset: acceptance rate below 1% over 10^4 attempts "
                "(mis-tuned script)");
    }

    double rate = static_cast<double>(cfg.n_keep) / static_cast<double>(attempts);
    std::ostringstream meta;
    meta << "format=v1;task_mix_grasp=" << cfg.grasp_fraction
         << ";noise_scale=" << cfg.noise_scale << ";filter=grasp-or-rearrange-any-v1"
         << ";num_objects=" << cfg.proto.num_objects << ";obs_mode="
         << (cfg.proto.obs_mode == env::ObsMode::Vector ? "vector" : "grid")
         << ";seed=" << cfg.seed << ";attempts=" << attempts << ";accept_rate=" << rate;
    ds.metadata = meta.str();
    if (stats) {
        stats->attempts = attempts;
        stats->accept_rate = rate;
    }
    return ds;
}

namespace {

constexpr char kMagic[5] = {'P', 'R', 'D', 'S', '1'};

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error(std::string("dataset: truncated file reading ") + what);
    return v;
}

} // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("dataset: cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, 1);
    write_pod<uint64_t>(os, ds.trajectories.size());
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.episode_len));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.obs_dim));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.act_dim));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.metadata.size()));
    os.write(ds.metadata.data(), static_cast<std::streamsize>(ds.metadata.size()));
    for (const auto& t : ds.trajectories) {
        if (t.steps != ds.episode_len)
            throw std::runtime_error("dataset: trajectory length " + std::to_string(t.steps) +
                                     " does not match episode length " +
                                     std::to_string(ds.episode_len));
        write_pod<uint8_t>(os, t.success ? 1 : 0);
        write_pod<uint8_t>(os, static_cast<uint8_t>(t.kind));
        write_pod<uint64_t>(os, t.seed);
        for (long s = 0; s < t.steps; ++s) {
            os.write(reinterpret_cast<const char*>(t.obs.data() + s * ds.obs_dim),
                     static_cast<std::streamsize>(sizeof(double) * ds.obs_dim));
            os.write(reinterpret_cast<const char*>(t.act.data() + s * ds.act_dim),
                     static_cast<std::streamsize>(sizeof(double) * ds.act_dim));
        }
    }
    if (!os) throw std::runtime_error("dataset: write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("dataset: cannot open: " + path);
    char magic[5];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("dataset: bad magic in " + path);
    uint32_t version = read_pod<uint32_t>(is, "version");
    if (version != 1)
        throw std::runtime_error("dataset: unsupported version " + std::to_string(version));

    Dataset ds;
    uint64_t n_traj = read_pod<uint64_t>(is, "trajectory count");
    ds.episode_len = read_pod<uint32_t>(is, "episode length");
    ds.obs_dim = read_pod<uint32_t>(is, "obs dim");
    ds.act_dim = read_pod<uint32_t>(is, "act dim");
    uint32_t meta_len = read_pod<uint32_t>(is, "metadata length");
    ds.metadata.resize(meta_len);
    is.read(ds.metadata.data(), meta_len);
    if (!is) throw std::runtime_error("dataset: truncated metadata in " + path);

    ds.trajectories.resize(n_traj);
    for (auto& t : ds.trajectories) {
        t.success = read_pod<uint8_t>(is, "success byte") != 0;
        t.kind = static_cast<env::TaskKind>(read_pod<uint8_t>(is, "kind byte"));
        t.seed = read_pod<uint64_t>(is, "seed");
        t.steps = ds.episode_len;
        t.obs.resize(static_cast<size_t>(t.steps * ds.obs_dim));
        t.act.resize(static_cast<size_t>(t.steps * ds.act_dim));
        for (long s = 0; s < t.steps; ++s) {
            is.read(reinterpret_cast<char*>(t.obs.data() + s * ds.obs_dim),
                    static_cast<std::streamsize>(sizeof(double) * ds.obs_dim));
            is.read(reinterpret_cast<char*>(t.act.data() + s * ds.act_dim),
                    static_cast<std::streamsize>(sizeof(double) * ds.act_dim));
        }
        if (!is) throw std::runtime_error("dataset: truncated trajectory data in " + path);
    }
    return ds;
}

} // namespace parrot::scripted
