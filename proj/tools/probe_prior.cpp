// Behavioral-prior probe: compares random-z rollouts through a trained
// prior against uniform-random actions on interaction and success rates.
#include <cstdio>
#include <cstring>

#include "parrot/flow.hpp"
#include "parrot/runner.hpp"
#include "parrot/scripted.hpp"

using namespace parrot;

int main(int argc, char** argv) {
    long n_traj = argc > 1 ? atol(argv[1]) : 3000;
    long prior_steps = argc > 2 ? atol(argv[2]) : 40000;
    const char* load = argc > 3 ? argv[3] : nullptr;

    flow::FlowModel prior;
    scripted::CollectConfig ccfg;
    ccfg.n_keep = n_traj;
    ccfg.noise_scale = 0.1;
    ccfg.seed = 42;
    ccfg.threads = 2;

    if (load) {
        prior = flow::load_flow(load);
        std::printf("loaded prior from %s\n", load);
    } else {
        auto ds = scripted::collect_dataset(ccfg);
        nd::Tensor obs, act;
        ds.to_matrices(obs, act);
        prior = flow::FlowModel(3, ds.obs_dim);
        nd::Rng init_rng(7);
        prior.init(init_rng);
        flow::PriorTrainConfig pcfg;
        pcfg.steps = prior_steps;
        pcfg.batch_size = 256;
        pcfg.learning_rate = 1e-4;
        pcfg.group_size = ds.episode_len;
        auto curve = flow::train_prior(prior, obs, act, pcfg);
        std::printf("prior val NLL %.3f -> %.3f\n", curve.init_val_nll, curve.final_val_nll);
        flow::save_flow("/tmp/probe_prior.ndif", prior);
    }

    env::WorldSpec world;
    world.kind = env::TaskKind::Grasp;

    auto run_episodes = [&](bool use_prior, int episodes, uint64_t seed) {
        nd::Rng rng(seed);
        int interactions = 0, successes = 0, grasp_events = 0;
        for (int e = 0; e < episodes; ++e) {
            auto [state, obs] = env::reset(world, nd::Rng::derive(seed, {(uint64_t)e}));
            bool interacted = false, succeeded = false;
            while (true) {
                std::vector<double> a;
                if (use_prior) {
                    a = prior.sample(obs, rng);
                } else {
                    a = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
                }
                auto r = env::step(state, {a[0], a[1], a[2]}, world);
                if (r.state.held >= 0 && state.held < 0) {
                    interacted = true;
                    ++grasp_events;
                }
                if (r.reward > 0) succeeded = true;
                state = r.state;
                obs = r.obs;
                if (r.done) break;
            }
            interactions += interacted ? 1 : 0;
            successes += succeeded ? 1 : 0;
        }
        std::printf("%s: interaction %.3f  success %.3f  grasp_events/ep %.2f\n",
                    use_prior ? "prior " : "random", interactions / double(episodes),
                    successes / double(episodes), grasp_events / double(episodes));
        return interactions / double(episodes);
    };

    double p = run_episodes(true, 500, 1001);
    double r = run_episodes(false, 500, 1002);
    std::printf("ratio: %.1fx\n", r > 0 ? p / r : 999.0);
    return 0;
}
