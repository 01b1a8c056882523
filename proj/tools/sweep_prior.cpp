// Trains the prior in segments and probes closed-loop behavior after each,
// printing NLL, action alignment with object directions, and rollout rates.
#include <cmath>
#include <cstdio>

#include "parrot/flow.hpp"
#include "parrot/scripted.hpp"

using namespace parrot;

int main(int argc, char** argv) {
    double lr = argc > 1 ? atof(argv[1]) : 3e-4;
    long segment = argc > 2 ? atol(argv[2]) : 25000;
    int segments = argc > 3 ? atoi(argv[3]) : 8;

    scripted::CollectConfig ccfg;
    ccfg.n_keep = 3000;
    ccfg.noise_scale = 0.1;
    ccfg.seed = 42;
    ccfg.threads = 2;
    auto ds = scripted::collect_dataset(ccfg);
    nd::Tensor obs, act;
    ds.to_matrices(obs, act);

    flow::FlowModel prior(3, ds.obs_dim);
    nd::Rng init_rng(7);
    prior.init(init_rng);

    env::WorldSpec world;
    world.kind = env::TaskKind::Grasp;

    auto probe = [&](long steps_done) {
        // alignment: at fresh resets, do sampled (dx,dy) point toward some object?
        nd::Rng rng(500 + steps_done);
        double align = 0.0;
        int align_n = 0;
        for (int e = 0; e < 200; ++e) {
            auto [state, o] = env::reset(world, nd::Rng::derive(77, {(uint64_t)e}));
            for (int rep = 0; rep < 3; ++rep) {
                auto a = prior.sample(o, rng);
                double nx = a[0], ny = a[1];
                double norm = std::hypot(nx, ny);
                if (norm < 1e-6) continue;
                double best = -1.0;
                for (const auto& p : state.objects) {
                    double dx = p.x - state.gripper.x, dy = p.y - state.gripper.y;
                    double dn = std::hypot(dx, dy);
                    if (dn < 1e-6) continue;
                    best = std::max(best, (nx * dx + ny * dy) / (norm * dn));
                }
                align += best;
                ++align_n;
            }
        }
        // closed-loop interaction rate
        nd::Rng rng2(900 + steps_done);
        int interact = 0, succ = 0;
        for (int e = 0; e < 300; ++e) {
            auto [state, o] = env::reset(world, nd::Rng::derive(31337, {(uint64_t)e}));
            bool inter = false, s_ok = false;
            while (true) {
                auto a = prior.sample(o, rng2);
                auto r = env::step(state, {a[0], a[1], a[2]}, world);
                if (r.state.held >= 0) inter = true;
                if (r.reward > 0) s_ok = true;
                state = r.state;
                o = r.obs;
                if (r.done) break;
            }
            interact += inter;
            succ += s_ok;
        }
        std::printf("  -> align %.3f  interact %.3f  task_success %.3f\n", align / align_n,
                    interact / 300.0, succ / 300.0);
        std::fflush(stdout);
    };

    std::printf("step 0 (identity prior)\n");
    probe(0);
    for (int seg = 1; seg <= segments; ++seg) {
        flow::PriorTrainConfig pcfg;
        pcfg.steps = segment;
        pcfg.batch_size = 256;
        pcfg.learning_rate = lr;
        pcfg.group_size = ds.episode_len;
        pcfg.eval_every = segment;
        pcfg.seed = 1000 + seg;
        auto curve = flow::train_prior(prior, obs, act, pcfg);
        std::printf("after %ld steps (lr %g): val NLL %.3f\n", seg * segment, lr,
                    curve.final_val_nll);
        probe(seg * segment);
    }
    return 0;
}
