// End-to-end pilot: collect data, train the prior, run latent-space SAC on
// the sparse grasp task, and print the learning curve with timings.
#include <chrono>
#include <cstdio>
#include <cstring>

#include "parrot/flow.hpp"
#include "parrot/runner.hpp"
#include "parrot/scripted.hpp"

using namespace parrot;

int main(int argc, char** argv) {
    long n_traj = argc > 1 ? atol(argv[1]) : 2000;
    long prior_steps = argc > 2 ? atol(argv[2]) : 20000;
    long rl_steps = argc > 3 ? atol(argv[3]) : 40000;
    const char* task = argc > 4 ? argv[4] : "grasp";

    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    scripted::CollectConfig ccfg;
    ccfg.n_keep = n_traj;
    ccfg.noise_scale = 0.1;
    ccfg.seed = 42;
    ccfg.threads = 2;
    scripted::CollectStats stats;
    auto ds = scripted::collect_dataset(ccfg, &stats);
    std::printf("[%6.1fs] collected %ld trajectories (accept %.2f)\n", elapsed(),
                (long)ds.trajectories.size(), stats.accept_rate);

    nd::Tensor obs, act;
    ds.to_matrices(obs, act);

    flow::FlowModel prior(3, ds.obs_dim);
    nd::Rng init_rng(7);
    prior.init(init_rng);
    flow::PriorTrainConfig pcfg;
    pcfg.steps = prior_steps;
    pcfg.batch_size = 256;
    pcfg.learning_rate = 1e-4;
    pcfg.group_size = ds.episode_len;
    pcfg.eval_every = 2000;
    auto curve = flow::train_prior(prior, obs, act, pcfg);
    std::printf("[%6.1fs] prior trained: val NLL %.3f -> %.3f\n", elapsed(),
                curve.init_val_nll, curve.final_val_nll);

    rl::RunConfig rcfg;
    rcfg.world.kind = std::strcmp(task, "grasp") == 0 ? env::TaskKind::Grasp
                                                      : env::TaskKind::PickPlace;
    rcfg.sac.hidden_units = 128;
    rcfg.sac.batch_size = 64;
    rcfg.total_env_steps = rl_steps;
    rcfg.eval_period = 2500;
    rcfg.eval_episodes = 20;
    rcfg.seed = 0;

    auto log = rl::run_rl(
        rl::FlowMapping(&prior), rcfg, "parrot", nullptr,
        [&](long step, const rl::MetricsRow& row) {
            std::printf("[%6.1fs] step %6ld  success %.2f  return %.2f  critic %.4f  alpha %.4f\n",
                        elapsed(), step, row.eval_success_rate, row.mean_episode_return,
                        row.critic_loss, row.alpha);
            std::fflush(stdout);
        });
    std::printf("[%6.1fs] done; final success %.2f\n", elapsed(),
                log.rows.back().eval_success_rate);
    return 0;
}
