#include "parrot/runner.hpp"

#include <algorithm>
#include <cmath>

namespace parrot::rl {

namespace {

std::vector<double> clip_latent(std::vector<double> z, double bound) {
    for (double& v : z) v = std::min(bound, std::max(-bound, v));
    return z;
}

env::EnvAction to_env_action(const std::vector<double>& a) {
    env::EnvAction act;
    act.dx = a.size() > 0 ? a[0] : 0.0;
    act.dy = a.size() > 1 ? a[1] : 0.0;
    act.grip = a.size() > 2 ? a[2] : 0.0;
    return act;
}

} // namespace

EvalResult evaluate_policy(const GaussianPolicy& policy, const ActionMapping& mapping,
                           const env::WorldSpec& world, long episodes, uint64_t seed,
                           double latent_clip) {
    EvalResult res;
    nd::Rng rng(seed); // unused by the deterministic policy, kept for symmetry
    for (long ep = 0; ep < episodes; ++ep) {
        auto [state, obs] = env::reset(world, nd::Rng::derive(seed, {0xea17u, static_cast<uint64_t>(ep)}));
        double ret = 0.0;
        bool succeeded = false;
        while (true) {
            auto z = clip_latent(policy.select_latent(obs, rng, /*deterministic=*/true),
                                 latent_clip);
            auto a = mapping.apply(z, obs);
            auto r = env::step(state, to_env_action(a), world);
            ret += r.reward;
            if (r.reward > 0) succeeded = true;
            state = r.state;
            obs = r.obs;
            if (r.done) break;
        }
        res.mean_return += ret;
        res.success_rate += succeeded ? 1.0 : 0.0;
    }
    res.mean_return /= static_cast<double>(episodes);
    res.success_rate /= static_cast<double>(episodes);
    return res;
}

MetricsLog run_rl(const ActionMapping& mapping, const RunConfig& cfg,
                  const std::string& method_tag, const GaussianPolicy* init_actor,
                  std::function<void(long, const MetricsRow&)> on_eval,
                  GaussianPolicy* final_policy) {
    cfg.world.validate();
    cfg.sac.validate();
    const long S = cfg.world.obs_dim();
    const long D = 3; // latent dim equals the action dim of the world

    SacLearner learner(S, D, cfg.sac, nd::Rng::derive(cfg.seed, {0x5acu}));
    if (init_actor) learner.policy().copy_from(*init_actor);

    ReplayBuffer buffer(cfg.sac.replay_capacity, S, D);
    nd::Rng explore_rng(nd::Rng::derive(cfg.seed, {0xe321u}));
    nd::Rng policy_rng(nd::Rng::derive(cfg.seed, {0x9017u}));
    nd::Rng warmup_rng(nd::Rng::derive(cfg.seed, {0x3a9u}));
    nd::Rng batch_rng(nd::Rng::derive(cfg.seed, {0xba7cu}));

    MetricsLog log;
    log.method = method_tag;
    log.task = cfg.world.kind == env::TaskKind::Grasp ? "grasp" : "pickplace";
    log.seed = cfg.seed;
    log.schema = mapping.schema();

    MetricsRow last_losses{};
    last_losses.alpha = learner.alpha();

    auto run_eval = [&](long step) {
        auto ev = evaluate_policy(learner.policy(), mapping, cfg.world, cfg.eval_episodes,
                                  nd::Rng::derive(cfg.seed, {0xeeu, static_cast<uint64_t>(step)}),
                                  cfg.sac.latent_clip);
        MetricsRow row;
        row.env_step = step;
        row.eval_success_rate = ev.success_rate;
        row.mean_episode_return = ev.mean_return;
        row.actor_loss = last_losses.actor_loss;
        row.critic_loss = last_losses.critic_loss;
        row.alpha = learner.alpha();
        log.rows.push_back(row);
        if (on_eval) on_eval(step, row);
    };

    run_eval(0);

    uint64_t episode = 0;
    long step = 0;
    while (step < cfg.total_env_steps) {
        auto [state, obs] = env::reset(
            cfg.world, nd::Rng::derive(cfg.seed, {0xe125u, episode}));
        bool done = false;
        while (!done && step < cfg.total_env_steps) {
            std::vector<double> z;
            if (step < cfg.sac.warmup_steps) {
                z.assign(static_cast<size_t>(D), 0.0);
                for (double& v : z) v = warmup_rng.normal(); // base-distribution warmup
            } else {
                z = learner.policy().select_latent(obs, policy_rng, false);
            }
            z = clip_latent(std::move(z), cfg.sac.latent_clip);

            std::vector<double> executed;
            std::vector<double> stored;
            if (cfg.explore_eps > 0.0 && explore_rng.uniform01() < cfg.explore_eps) {
                executed = cfg.explore_prior->sample(obs, explore_rng);
                stored = executed; // raw schema: the executed action itself
            } else {
                executed = mapping.apply(z, obs);
                stored = mapping.schema() == std::string("latent") ? z : executed;
            }

            auto r = env::step(state, to_env_action(executed), cfg.world);
            ++step;

            // timeout terminations bootstrap; success is a true terminal
            bool terminal = r.done && r.state.succeeded;
            buffer.add(obs, stored, r.reward, r.obs, terminal);

            state = r.state;
            obs = r.obs;
            done = r.done;

            if (step > cfg.sac.warmup_steps && buffer.size() >= cfg.sac.batch_size) {
                for (long u = 0; u < cfg.sac.updates_per_step; ++u) {
                    auto losses = learner.update(buffer.sample(cfg.sac.batch_size, batch_rng));
                    last_losses.actor_loss = losses.actor;
                    last_losses.critic_loss = losses.critic;
                }
            }

            if (step % cfg.eval_period == 0) run_eval(step);
        }
        ++episode;
    }
    if (log.rows.empty() || log.rows.back().env_step != cfg.total_env_steps) run_eval(cfg.total_env_steps);
    if (final_policy) *final_policy = learner.policy();
    return log;
}

MetricsLog run_parrot(const flow::FlowModel& prior, const RunConfig& cfg,
                      GaussianPolicy* final_policy) {
    FlowMapping mapping(&prior);
    return run_rl(mapping, cfg, "parrot", nullptr, {}, final_policy);
}

} // namespace parrot::rl
