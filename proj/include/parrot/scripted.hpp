#pragma once

#include <string>
#include <vector>

#include "parrot/env.hpp"
#include "parrot/rng.hpp"
#include "parrot/tensor.hpp"

namespace parrot::scripted {

/// Grip command magnitude of the scripted controllers. Soft on purpose:
/// collection noise can flip the sign, so a noisy script occasionally
/// drops what it holds, which is what makes some rollouts fail the keep
/// filter and gives the dataset its failure diversity.
constexpr double kGripClose = 0.25;
constexpr double kGripOpen = -0.25;

/// Randomized scripted grasp controller. Approaches the target while open,
/// closes within the distance threshold, then drags the object away from
/// its spawn point until the lifted rule fires. Noise is added to the
/// deterministic action before the environment clips it.
env::EnvAction scripted_grasp(const env::WorldState& state, const env::WorldSpec& spec,
                              nd::Rng& rng, double noise_scale);

/// Scripted pick-and-place: grasp phase via scripted_grasp, carry to the
/// container center, open once, then hold zero actions. `place_attempted`
/// is the controller's latch and must start false each episode.
env::EnvAction scripted_pick_place(const env::WorldState& state, const env::WorldSpec& spec,
                                   bool& place_attempted, nd::Rng& rng, double noise_scale);

/// Keep rule for collected trajectories, evaluated on the final state:
/// some object is held and lifted, or some non-held object sits in the
/// container region. Success on a distractor counts.
bool keep_filter(const env::WorldState& final_state, const env::WorldSpec& spec);

struct Trajectory {
    std::vector<double> obs; // steps * obs_dim, row per step
    std::vector<double> act; // steps * act_dim
    long steps = 0;
    bool success = false;
    env::TaskKind kind = env::TaskKind::Grasp;
    uint64_t seed = 0; // environment seed of the episode
};

struct Dataset {
    long obs_dim = 0;
    long act_dim = 3;
    long episode_len = 25;
    std::string metadata;
    std::vector<Trajectory> trajectories;

    long pair_count() const {
        long n = 0;
        for (const auto& t : trajectories) n += t.steps;
        return n;
    }

    /// Flattens all (observation, action) pairs into row matrices for
    /// density-model training.
    void to_matrices(nd::Tensor& obs, nd::Tensor& act) const;
};

struct CollectConfig {
    long n_keep = 10000;
    double grasp_fraction = 0.5; // task mix: P(episode is Grasp)
    double noise_scale = 0.1;
    uint64_t seed = 0;
    long threads = 1;
    env::WorldSpec proto; // kind and target are randomized per episode

    CollectConfig() {
        proto.kind = env::TaskKind::Grasp;
    }
};

struct CollectStats {
    long attempts = 0;
    double accept_rate = 0.0;
};

/// Rolls out scripted episodes (full episode length, ignoring task
/// termination), keeps those passing the filter, and returns exactly
/// n_keep trajectories in deterministic episode order regardless of the
/// thread count. Aborts if the acceptance rate is below 1% after 10^4
/// attempts.
Dataset collect_dataset(const CollectConfig& cfg, CollectStats* stats = nullptr);

/// Binary dataset file, magic "PRDS1"; bit-exact round-trip.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

} // namespace parrot::scripted
