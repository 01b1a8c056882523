#pragma once

#include <cstdint>
#include <vector>

#include "parrot/rng.hpp"
#include "parrot/tensor.hpp"

namespace parrot::env {

enum class TaskKind : uint8_t { Grasp = 0, PickPlace = 1 };

enum class ObsMode : uint8_t { Vector = 0, Grid = 1 };

/// Task family, scene composition, and dynamics constants. The workspace is
/// the unit square; all distances are workspace units.
struct WorldSpec {
    TaskKind kind = TaskKind::Grasp;
    long num_objects = 3;
    long target_index = 0;
    double container_cx = 0.85; // PickPlace only
    double container_cy = 0.85;
    double container_hx = 0.035;
    double container_hy = 0.035;
    double grasp_radius = 0.05;
    double max_step = 0.08; // per-axis gripper travel at |dx| = 1
    long episode_len = 25;
    double lift_distance = 0.15; // displacement from spawn that counts as lifted
    ObsMode obs_mode = ObsMode::Vector;
    long grid_cells = 12;

    bool has_container() const { return kind == TaskKind::PickPlace; }
    long obs_dim() const {
        return obs_mode == ObsMode::Vector ? 3 + 2 * num_objects
                                           : 3 * grid_cells * grid_cells;
    }
    void validate() const;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Full simulator state. Spawn positions are kept to evaluate the lifted
/// rule; `succeeded` latches the first success for episode bookkeeping.
struct WorldState {
    Vec2 gripper;
    bool gripper_open = true;
    long held = -1; // object index or -1
    std::vector<Vec2> objects;
    std::vector<Vec2> spawns;
    std::vector<bool> lifted;
    long t = 0;
    bool succeeded = false;
};

/// Continuous action (dx, dy, grip), each in [-1, 1] after clipping.
/// grip > 0 commands the gripper closed, grip <= 0 commands it open.
struct EnvAction {
    double dx = 0.0;
    double dy = 0.0;
    double grip = 0.0;
};

using Observation = std::vector<double>;

struct StepResult {
    WorldState state;
    Observation obs;
    double reward = 0.0;
    bool done = false;
};

/// Places objects uniformly in the workspace with pairwise separation of at
/// least twice the grasp radius (and outside the container for PickPlace).
/// Deterministic given the seed. Throws after 1000 rejection samples.
std::pair<WorldState, Observation> reset(const WorldSpec& spec, uint64_t seed);

/// Task predicate. Grasp: target held and lifted. PickPlace: target not
/// held and inside the container region.
bool success(const WorldState& state, const WorldSpec& spec);

/// Pure dynamics: clip action, move gripper, track held object, apply the
/// grip command (close grasps the nearest object within reach, ties to the
/// lowest index; open releases), update lifted flags, advance the counter.
/// No reward or termination logic; data collection steps this directly.
WorldState step_dynamics(const WorldState& state, const EnvAction& action,
                         const WorldSpec& spec);

bool episode_done(const WorldState& state, const WorldSpec& spec);

/// RL-facing step: reward 1 exactly on the step the success predicate first
/// becomes true; done on success or when the step counter reaches the
/// episode length. Throws if called on a finished episode.
StepResult step(const WorldState& state, const EnvAction& action, const WorldSpec& spec);

Observation observe(const WorldState& state, const WorldSpec& spec);

} // namespace parrot::env
