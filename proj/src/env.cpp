#include "parrot/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace parrot::env {

namespace {

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool in_container(const Vec2& p, const WorldSpec& spec) {
    return std::abs(p.x - spec.container_cx) <= spec.container_hx &&
           std::abs(p.y - spec.container_cy) <= spec.container_hy;
}

} // namespace

void WorldSpec::validate() const {
    if (num_objects < 1) throw std::runtime_error("WorldSpec: need at least one object");
    if (target_index < 0 || target_index >= num_objects)
        throw std::runtime_error("WorldSpec: target index out of range");
    if (has_container()) {
        if (container_cx - container_hx < 0.0 || container_cx + container_hx > 1.0 ||
            container_cy - container_hy < 0.0 || container_cy + container_hy > 1.0)
            throw std::runtime_error("WorldSpec: container region outside workspace");
    }
    if (grasp_radius <= 0.0 || max_step <= 0.0 || episode_len < 1)
        throw std::runtime_error("WorldSpec: non-positive dynamics constant");
}

std::pair<WorldState, Observation> reset(const WorldSpec& spec, uint64_t seed) {
    spec.validate();
    nd::Rng rng(seed);

    WorldState s;
    s.gripper = {0.5, 0.1};
    s.gripper_open = true;
    s.held = -1;
    s.objects.resize(static_cast<size_t>(spec.num_objects));
    s.spawns.resize(static_cast<size_t>(spec.num_objects));
    s.lifted.assign(static_cast<size_t>(spec.num_objects), false);

    long attempts = 0;
    for (long k = 0; k < spec.num_objects; ++k) {
        while (true) {
            if (++attempts > 1000)
                throw std::runtime_error("reset: cannot place objects (overcrowded spec)");
            Vec2 p{rng.uniform01(), rng.uniform01()};
            // PickPlace scenes keep spawns out of the container so that no
            // episode starts already solved.
            if (spec.has_container() && std::abs(p.x - spec.container_cx) <=
                                                spec.container_hx + spec.grasp_radius &&
                std::abs(p.y - spec.container_cy) <= spec.container_hy + spec.grasp_radius)
                continue;
            bool ok = true;
            for (long j = 0; j < k; ++j)
                if (dist(p, s.objects[static_cast<size_t>(j)]) < 2.0 * spec.grasp_radius) {
                    ok = false;
                    break;
                }
            if (ok) {
                s.objects[static_cast<size_t>(k)] = p;
                s.spawns[static_cast<size_t>(k)] = p;
                break;
            }
        }
    }
    return {s, observe(s, spec)};
}

bool success(const WorldState& state, const WorldSpec& spec) {
    const long tgt = spec.target_index;
    if (spec.kind == TaskKind::Grasp)
        return state.held == tgt && state.lifted[static_cast<size_t>(tgt)];
    return state.held != tgt && in_container(state.objects[static_cast<size_t>(tgt)], spec);
}

WorldState step_dynamics(const WorldState& state, const EnvAction& action,
                         const WorldSpec& spec) {
    WorldState s = state;

    const double dx = clip(action.dx, -1.0, 1.0);
    const double dy = clip(action.dy, -1.0, 1.0);
    const bool want_closed = clip(action.grip, -1.0, 1.0) > 0.0;

    s.gripper.x = clip(s.gripper.x + spec.max_step * dx, 0.0, 1.0);
    s.gripper.y = clip(s.gripper.y + spec.max_step * dy, 0.0, 1.0);
    if (s.held >= 0) s.objects[static_cast<size_t>(s.held)] = s.gripper;

    if (want_closed && s.gripper_open) {
        long best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (long k = 0; k < spec.num_objects; ++k) {
            double d = dist(s.gripper, s.objects[static_cast<size_t>(k)]);
            if (d <= spec.grasp_radius && d < best_d) { // ties resolve to lowest index
                best = k;
                best_d = d;
            }
        }
        if (best >= 0) {
            s.held = best;
            s.objects[static_cast<size_t>(best)] = s.gripper;
        }
        s.gripper_open = false;
    } else if (!want_closed && !s.gripper_open) {
        s.held = -1;
        s.gripper_open = true;
    }

    if (s.held >= 0 &&
        dist(s.objects[static_cast<size_t>(s.held)], s.spawns[static_cast<size_t>(s.held)]) >=
            spec.lift_distance)
        s.lifted[static_cast<size_t>(s.held)] = true;

    s.t += 1;
    return s;
}

bool episode_done(const WorldState& state, const WorldSpec& spec) {
    return state.succeeded || state.t >= spec.episode_len;
}

StepResult step(const WorldState& state, const EnvAction& action, const WorldSpec& spec) {
    if (episode_done(state, spec))
        throw std::runtime_error("step: episode already finished at t=" +
                                 std::to_string(state.t));
    StepResult r;
    r.state = step_dynamics(state, action, spec);
    bool succ = success(r.state, spec);
    r.reward = succ ? 1.0 : 0.0;
    r.state.succeeded = succ;
    r.done = succ || r.state.t >= spec.episode_len;
    r.obs = observe(r.state, spec);
    return r;
}

Observation observe(const WorldState& state, const WorldSpec& spec) {
    if (spec.obs_mode == ObsMode::Vector) {
        Observation o;
        o.reserve(static_cast<size_t>(spec.obs_dim()));
        o.push_back(state.gripper.x);
        o.push_back(state.gripper.y);
        o.push_back(state.gripper_open ? 1.0 : 0.0);
        for (const Vec2& p : state.objects) {
            o.push_back(p.x);
            o.push_back(p.y);
        }
        return o;
    }

    const long n = spec.grid_cells;
    Observation o(static_cast<size_t>(3 * n * n), 0.0);
    auto cell = [n](const Vec2& p) {
        long ix = std::min(n - 1, static_cast<long>(p.x * static_cast<double>(n)));
        long iy = std::min(n - 1, static_cast<long>(p.y * static_cast<double>(n)));
        return iy * n + ix;
    };
    o[static_cast<size_t>(cell(state.gripper))] = 1.0;
    for (long k = 0; k < spec.num_objects; ++k) {
        long ch = (k == spec.target_index) ? 1 : 2;
        o[static_cast<size_t>(ch * n * n + cell(state.objects[static_cast<size_t>(k)]))] = 1.0;
    }
    return o;
}

} // namespace parrot::env
