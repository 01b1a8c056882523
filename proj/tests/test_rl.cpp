#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "parrot/baselines.hpp"
#include "parrot/flow.hpp"
#include "parrot/replay.hpp"
#include "parrot/runner.hpp"
#include "parrot/sac.hpp"
#include "test_util.hpp"

using namespace parrot;
using namespace parrot::rl;
using nd::Graph;
using nd::Param;
using nd::Rng;
using nd::Tensor;

namespace {

SacConfig small_sac() {
    SacConfig cfg;
    cfg.hidden_units = 32;
    cfg.batch_size = 16;
    cfg.warmup_steps = 50;
    cfg.replay_capacity = 5000;
    return cfg;
}

std::vector<double> rand_obs(long dim, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(dim));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

} // namespace

TEST_CASE("freshly initialized policy is the base distribution") {
    Rng rng(1);
    GaussianPolicy pi("p", 9, 3, 64);
    pi.init(rng);

    auto s = rand_obs(9, rng);
    auto det = pi.select_latent(s, rng, true);
    for (double v : det) CHECK(v == 0.0);

    Rng draw(7);
    const int n = 10000;
    std::vector<double> sum(3, 0.0), sum2(3, 0.0);
    for (int i = 0; i < n; ++i) {
        auto z = pi.select_latent(s, draw, false);
        for (int d = 0; d < 3; ++d) {
            sum[static_cast<size_t>(d)] += z[static_cast<size_t>(d)];
            sum2[static_cast<size_t>(d)] += z[static_cast<size_t>(d)] * z[static_cast<size_t>(d)];
        }
    }
    for (int d = 0; d < 3; ++d) {
        double mean = sum[static_cast<size_t>(d)] / n;
        double stddev = std::sqrt(sum2[static_cast<size_t>(d)] / n - mean * mean);
        CHECK(std::abs(mean) < 0.05);
        CHECK(stddev > 0.9);
        CHECK(stddev < 1.1);
    }

    Rng r1(3), r2(3);
    CHECK(pi.select_latent(s, r1, false) == pi.select_latent(s, r2, false));
}

TEST_CASE("replay buffer evicts FIFO and samples without replacement") {
    ReplayBuffer buf(4, 2, 1);
    for (int i = 0; i < 6; ++i)
        buf.add({double(i), 0.0}, {double(i)}, double(i), {double(i + 1), 0.0}, false);
    CHECK(buf.size() == 4);

    // entries 0 and 1 were evicted
    Rng rng(5);
    auto batch = buf.sample(4, rng);
    std::vector<double> acts;
    for (long i = 0; i < 4; ++i) acts.push_back(batch.act[i]);
    std::sort(acts.begin(), acts.end());
    CHECK(acts == std::vector<double>{2.0, 3.0, 4.0, 5.0}); // distinct: no replacement

    CHECK_THROWS(buf.sample(5, rng));
}

TEST_CASE("target entropy and alpha behavior") {
    auto cfg = small_sac();
    SacLearner learner(5, 3, cfg, 11);
    CHECK(learner.target_entropy() == -3.0);
    CHECK(learner.alpha() == 1.0);

    ReplayBuffer buf(100, 5, 3);
    Rng rng(2);
    for (int i = 0; i < 64; ++i)
        buf.add(rand_obs(5, rng), rand_obs(3, rng), rng.uniform01() < 0.1 ? 1.0 : 0.0,
                rand_obs(5, rng), false);
    for (int i = 0; i < 30; ++i) {
        learner.update(buf.sample(16, rng));
        CHECK(learner.alpha() > 0.0);
    }
}

TEST_CASE("targets hard-copy exactly at the update period") {
    auto cfg = small_sac();
    cfg.target_update_period = 10;
    SacLearner learner(4, 3, cfg, 3);
    ReplayBuffer buf(100, 4, 3);
    Rng rng(4);
    for (int i = 0; i < 32; ++i)
        buf.add(rand_obs(4, rng), rand_obs(3, rng), 0.0, rand_obs(4, rng), false);

    auto params_equal = [&]() {
        auto a = const_cast<QFunction&>(learner.q1()).params();
        auto b = const_cast<QFunction&>(learner.target_q1()).params();
        for (size_t i = 0; i < a.size(); ++i)
            if (a[i]->value.vec() != b[i]->value.vec()) return false;
        return true;
    };

    CHECK(params_equal()); // synced at construction
    for (int i = 0; i < 9; ++i) learner.update(buf.sample(16, rng));
    CHECK_FALSE(params_equal()); // 9 updates: online moved, targets stale
    learner.update(buf.sample(16, rng));
    CHECK(params_equal()); // 10th update syncs bit-exactly
}

TEST_CASE("single-sample critic target matches the hand-computed value") {
    auto cfg = small_sac();
    cfg.batch_size = 1;
    SacLearner learner(4, 3, cfg, 17);

    Rng rng(9);
    std::vector<double> s = rand_obs(4, rng);
    std::vector<double> z = rand_obs(3, rng);
    std::vector<double> s2 = rand_obs(4, rng);

    ReplayBuffer buf(10, 4, 3);
    buf.add(s, z, 0.0, s2, false); // all-zero-reward batch
    Rng sample_rng(1);
    auto batch = buf.sample(1, sample_rng);

    // snapshot everything the update will use
    Rng noise = learner.noise_rng_snapshot();
    double eps[3];
    for (int i = 0; i < 3; ++i) eps[i] = noise.normal();

    Graph g(false);
    auto heads = learner.policy().forward(g, g.leaf(Tensor::row(s2)));
    double logp2 = 0.0;
    std::vector<double> z2(3);
    static constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    for (int i = 0; i < 3; ++i) {
        double mean = g.value(heads.mean)[i];
        double stddev = std::exp(g.value(heads.log_std)[i]);
        double raw = mean + stddev * eps[i];
        // log pi at the pre-clip sample; Q inputs are clipped to [-4, 4]
        z2[static_cast<size_t>(i)] = std::min(cfg.latent_clip, std::max(-cfg.latent_clip, raw));
        logp2 += -0.5 * kLog2Pi - std::log(stddev) - 0.5 * eps[i] * eps[i];
    }
    double qmin = std::min(learner.target_q1().value(s2, z2), learner.target_q2().value(s2, z2));
    double alpha = learner.alpha();
    double y = 0.0 + cfg.gamma * (qmin - alpha * logp2); // reward 0, not terminal
    double d1 = learner.q1().value(s, z) - y;
    double d2 = learner.q2().value(s, z) - y;
    double expected_critic_loss = d1 * d1 + d2 * d2;

    auto losses = learner.update(batch);
    CHECK(losses.critic == doctest::Approx(expected_critic_loss).epsilon(1e-10));
}

TEST_CASE("actor and critic loss gradients match finite differences") {
    // small nets, fixed batch, frozen noise
    const long S = 4, D = 3, B = 4, H = 8;
    Rng rng(21);
    GaussianPolicy policy("p", S, D, H);
    QFunction q1("q1", S, D, H), q2("q2", S, D, H), t1("t1", S, D, H), t2("t2", S, D, H);
    policy.init(rng);
    q1.init(rng);
    q2.init(rng);
    t1.init(rng);
    t2.init(rng);
    // non-zero output layers so gradients are informative
    for (Param* p : q1.params()) testutil::fill_random(*p, rng, 0.3);
    for (Param* p : q2.params()) testutil::fill_random(*p, rng, 0.3);
    for (Param* p : policy.params()) testutil::fill_random(*p, rng, 0.3);

    Tensor obs = testutil::random_tensor({B, S}, rng, 0.7);
    Tensor act = testutil::random_tensor({B, D}, rng, 0.7);
    Tensor y = testutil::random_tensor({B, 1}, rng, 0.5);
    Tensor eps = testutil::random_tensor({B, D}, rng, 1.0);
    const double alpha = 0.37;

    auto critic_loss = [&](Graph& g) {
        auto d1 = g.sub(q1.forward(g, g.leaf(obs), g.leaf(act)), g.leaf(y));
        auto d2 = g.sub(q2.forward(g, g.leaf(obs), g.leaf(act)), g.leaf(y));
        return g.add(g.mean(g.mul(d1, d1)), g.mean(g.mul(d2, d2)));
    };
    auto actor_loss = [&](Graph& g) {
        auto heads = policy.forward(g, g.leaf(obs));
        auto stddev = g.exp(heads.log_std);
        auto z = g.add(heads.mean, g.mul(stddev, g.leaf(eps)));
        auto logp = g.gaussian_log_density(z, heads.mean, stddev);
        auto zc = g.clamp(z, -4.0, 4.0);
        auto qmin = g.minimum(q1.forward(g, g.leaf(obs), zc), q2.forward(g, g.leaf(obs), zc));
        return g.mean(g.sub(g.scale(logp, alpha), qmin));
    };

    {
        std::vector<Param*> qp = q1.params();
        for (Param* p : q2.params()) qp.push_back(p);
        Graph g;
        auto loss = critic_loss(g);
        g.backward(loss, qp);
        std::vector<Tensor> analytic;
        for (Param* p : qp) analytic.push_back(p->grad);
        auto fd = testutil::fd_gradient(
            [&]() {
                Graph g2;
                return g2.scalar_value(critic_loss(g2));
            },
            qp);
        for (size_t i = 0; i < qp.size(); ++i)
            CHECK(testutil::max_rel_err(analytic[i], fd[i], 1e-7) < 1e-3);
    }
    {
        auto pp = policy.params();
        Graph g;
        auto loss = actor_loss(g);
        g.backward(loss, pp);
        std::vector<Tensor> analytic;
        for (Param* p : pp) analytic.push_back(p->grad);
        auto fd = testutil::fd_gradient(
            [&]() {
                Graph g2;
                return g2.scalar_value(actor_loss(g2));
            },
            pp);
        for (size_t i = 0; i < pp.size(); ++i)
            CHECK(testutil::max_rel_err(analytic[i], fd[i], 1e-7) < 1e-3);
    }
}

TEST_CASE("zero env steps yields only the step-zero evaluation") {
    RunConfig cfg;
    cfg.world.kind = env::TaskKind::Grasp;
    cfg.sac = small_sac();
    cfg.total_env_steps = 0;
    IdentityMapping mapping;
    auto log = run_rl(mapping, cfg, "sac");
    CHECK(log.rows.size() == 1);
    CHECK(log.rows[0].env_step == 0);
}

TEST_CASE("identity flow and scratch SAC produce bit-identical runs") {
    Rng rng(31);
    flow::FlowModel identity(3, 9);
    identity.init(rng); // zero heads: exact identity map

    RunConfig cfg;
    cfg.world.kind = env::TaskKind::Grasp;
    cfg.sac = small_sac();
    cfg.total_env_steps = 400;
    cfg.eval_period = 200;
    cfg.eval_episodes = 4;
    cfg.seed = 5;

    auto parrot_log = run_parrot(identity, cfg);
    auto scratch_log = baselines::run_sac_scratch(cfg);

    CHECK(parrot_log.schema == "latent");
    CHECK(scratch_log.schema == "raw");
    REQUIRE(parrot_log.rows.size() == scratch_log.rows.size());
    for (size_t i = 0; i < parrot_log.rows.size(); ++i) {
        CHECK(parrot_log.rows[i].env_step == scratch_log.rows[i].env_step);
        CHECK(parrot_log.rows[i].eval_success_rate == scratch_log.rows[i].eval_success_rate);
        CHECK(parrot_log.rows[i].mean_episode_return == scratch_log.rows[i].mean_episode_return);
        CHECK(parrot_log.rows[i].actor_loss == scratch_log.rows[i].actor_loss);
        CHECK(parrot_log.rows[i].critic_loss == scratch_log.rows[i].critic_loss);
        CHECK(parrot_log.rows[i].alpha == scratch_log.rows[i].alpha);
    }
}

TEST_CASE("runs are reproducible from the seed") {
    RunConfig cfg;
    cfg.world.kind = env::TaskKind::Grasp;
    cfg.sac = small_sac();
    cfg.total_env_steps = 300;
    cfg.eval_period = 150;
    cfg.eval_episodes = 3;
    cfg.seed = 12;
    IdentityMapping mapping;
    auto l1 = run_rl(mapping, cfg, "sac");
    auto l2 = run_rl(mapping, cfg, "sac");
    REQUIRE(l1.rows.size() == l2.rows.size());
    for (size_t i = 0; i < l1.rows.size(); ++i) {
        CHECK(l1.rows[i].critic_loss == l2.rows[i].critic_loss);
        CHECK(l1.rows[i].alpha == l2.rows[i].alpha);
        CHECK(l1.rows[i].eval_success_rate == l2.rows[i].eval_success_rate);
    }
}

TEST_CASE("reward scale is threaded through, metrics stay unscaled") {
    RunConfig cfg;
    cfg.world.kind = env::TaskKind::Grasp;
    cfg.sac = small_sac();
    cfg.sac.reward_scale = 2.0;
    cfg.total_env_steps = 200;
    cfg.eval_period = 100;
    cfg.eval_episodes = 3;
    IdentityMapping mapping;
    auto log = run_rl(mapping, cfg, "sac");
    for (const auto& row : log.rows) {
        CHECK(row.eval_success_rate >= 0.0);
        CHECK(row.eval_success_rate <= 1.0);
        CHECK(row.mean_episode_return >= 0.0);
        CHECK(row.mean_episode_return <= 1.0); // sparse task: at most one reward
    }
}

TEST_CASE("latent invertibility witness through a trained-shape flow") {
    Rng rng(41);
    flow::FlowModel prior(3, 9);
    for (Param* p : prior.params()) testutil::fill_random(*p, rng, 0.2);

    GaussianPolicy pi("p", 9, 3, 32);
    pi.init(rng);
    for (Param* p : pi.params()) testutil::fill_random(*p, rng, 0.2);

    for (int trial = 0; trial < 50; ++trial) {
        auto s = rand_obs(9, rng);
        auto z = pi.select_latent(s, rng, false);
        for (double& v : z) v = std::min(4.0, std::max(-4.0, v));
        auto a = prior.forward_map(z, s);
        auto [z_back, ld] = prior.inverse_map(a, s);
        for (int i = 0; i < 3; ++i)
            CHECK(std::abs(z_back[static_cast<size_t>(i)] - z[static_cast<size_t>(i)]) < 1e-6);
    }
}

TEST_CASE("dense shaped reward: the learner itself can learn to reach") {
    // reward-dense sanity harness: reward = -distance(gripper, target),
    // success = ending an episode within twice the grasp radius
    env::WorldSpec world;
    world.kind = env::TaskKind::Grasp;

    // sanity-harness hyperparameters: short horizon, fast target refresh,
    // small fixed temperature (the shaped task is not the paper's setting)
    SacConfig cfg;
    cfg.hidden_units = 64;
    cfg.batch_size = 64;
    cfg.warmup_steps = 500;
    cfg.replay_capacity = 50000;
    cfg.gamma = 0.95;
    cfg.target_update_period = 100;
    cfg.auto_entropy = false;
    cfg.init_alpha = 0.05;

    SacLearner learner(world.obs_dim(), 3, cfg, 77);
    ReplayBuffer buf(cfg.replay_capacity, world.obs_dim(), 3);
    Rng rng(78);

    const long total_steps = 15000;
    long step = 0;
    uint64_t episode = 0;
    while (step < total_steps) {
        auto [state, obs] = env::reset(world, nd::Rng::derive(77, {episode}));
        for (long t = 0; t < world.episode_len && step < total_steps; ++t) {
            std::vector<double> z;
            if (step < cfg.warmup_steps) {
                z = {rng.normal(), rng.normal(), rng.normal()};
            } else {
                z = learner.policy().select_latent(obs, rng, false);
            }
            for (double& v : z) v = std::min(4.0, std::max(-4.0, v));
            auto next = env::step_dynamics(state, {z[0], z[1], z[2]}, world);
            const auto& tgt = next.objects[static_cast<size_t>(world.target_index)];
            double d = std::hypot(next.gripper.x - tgt.x, next.gripper.y - tgt.y);
            auto next_obs = env::observe(next, world);
            buf.add(obs, z, -d, next_obs, false);
            state = next;
            obs = next_obs;
            ++step;
            if (step > cfg.warmup_steps && buf.size() >= cfg.batch_size)
                learner.update(buf.sample(cfg.batch_size, rng));
        }
        ++episode;
    }

    int successes = 0;
    const int eval_eps = 40;
    for (int e = 0; e < eval_eps; ++e) {
        auto [state, obs] = env::reset(world, nd::Rng::derive(999, {static_cast<uint64_t>(e)}));
        for (long t = 0; t < world.episode_len; ++t) {
            auto z = learner.policy().select_latent(obs, rng, true);
            for (double& v : z) v = std::min(4.0, std::max(-4.0, v));
            state = env::step_dynamics(state, {z[0], z[1], z[2]}, world);
            obs = env::observe(state, world);
        }
        const auto& tgt = state.objects[static_cast<size_t>(world.target_index)];
        if (std::hypot(state.gripper.x - tgt.x, state.gripper.y - tgt.y) <
            2.0 * world.grasp_radius)
            ++successes;
    }
    CHECK(successes > eval_eps / 2);
}
