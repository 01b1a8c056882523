#pragma once

#include <string>
#include <vector>

#include "parrot/baselines.hpp"
#include "parrot/env.hpp"
#include "parrot/flow.hpp"
#include "parrot/sac.hpp"
#include "parrot/scripted.hpp"

namespace parrot::harness {

/// One experiment = (method, task, dataset, hyperparameters, seeds).
/// Serializes to a flat INI-style file with section headers; parsing the
/// serialized form reproduces the struct and the bytes (round-trip
/// stable), which is what the config hash is computed over.
struct ExperimentConfig {
    // [experiment]
    std::string method = "parrot"; // parrot | sac | bc_sac | hirl | prior_explore
    std::string task = "grasp";    // grasp | pickplace
    std::vector<uint64_t> seeds = {0, 1, 2};
    long total_env_steps = 100000;
    long eval_period = 5000;
    long eval_episodes = 20;
    std::string dataset_path = "data/prior10k.prds";
    std::string output_dir = "runs";

    // [world]
    env::WorldSpec world;

    // [collect]
    scripted::CollectConfig collect;

    // [flow]
    long flow_feat_dim = 32;
    int flow_layers = 4;
    long flow_hidden = 64;
    double flow_clamp = 5.0;
    flow::PriorTrainConfig prior;

    // [sac]
    rl::SacConfig sac;

    // [bc]
    baselines::BcConfig bc;

    // [cvae]
    baselines::CvaeConfig cvae;

    // [prior_explore]
    double explore_eps = 0.9;

    std::string serialize() const;
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;

    /// FNV hash of the canonical serialization.
    std::string config_hash() const;

    /// World spec with the task kind and observation dims applied.
    env::WorldSpec world_for_task() const;

    rl::RunConfig run_config(uint64_t seed) const;
};

} // namespace parrot::harness
