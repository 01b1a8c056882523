// Rough throughput probe: approximate cost of one SAC-style update
// (policy fwd/bwd + twin critic fwd/bwd + target fwd) at various widths.
#include <chrono>
#include <cstdio>
#include <vector>

#include "parrot/adam.hpp"
#include "parrot/graph.hpp"
#include "parrot/nn.hpp"
#include "parrot/rng.hpp"

using namespace parrot::nd;

int main() {
    Rng rng(1);
    const long S = 9, D = 3;
    for (long h : {64L, 128L, 256L}) {
        for (long B : {64L, 128L, 256L}) {
            Mlp policy("pi", S, {h, h}, 2 * D);
            Mlp q1("q1", S + D, {h, h}, 1), q2("q2", S + D, {h, h}, 1);
            Mlp t1("t1", S + D, {h, h}, 1), t2("t2", S + D, {h, h}, 1);
            policy.init(rng);
            q1.init(rng);
            q2.init(rng);
            t1.init(rng);
            t2.init(rng);
            std::vector<Param*> pp, qp;
            policy.collect(pp);
            q1.collect(qp);
            q2.collect(qp);
            Adam popt(pp, {.lr = 3e-4}), qopt(qp, {.lr = 3e-4});

            Tensor obs(std::vector<long>{B, S});
            Tensor obs_act(std::vector<long>{B, S + D});
            for (long i = 0; i < obs.size(); ++i) obs[i] = rng.normal();
            for (long i = 0; i < obs_act.size(); ++i) obs_act[i] = rng.normal();

            auto t0 = std::chrono::steady_clock::now();
            const int iters = 60;
            for (int it = 0; it < iters; ++it) {
                { // target side, no grad
                    Graph g(false);
                    auto x = g.leaf(obs_act);
                    t1.forward(g, x);
                    t2.forward(g, x);
                    policy.forward(g, g.leaf(obs));
                }
                { // critic update
                    Graph g;
                    auto x = g.leaf(obs_act);
                    auto a = q1.forward(g, x);
                    auto b = q2.forward(g, x);
                    auto loss = g.add(g.mean(g.mul(a, a)), g.mean(g.mul(b, b)));
                    g.backward(loss, qp);
                    qopt.step();
                }
                { // actor update (policy fwd + critics fwd + bwd)
                    Graph g;
                    auto p = policy.forward(g, g.leaf(obs));
                    auto q = q1.forward(g, g.leaf(obs_act));
                    auto q2v = q2.forward(g, g.leaf(obs_act));
                    auto loss =
                        g.add(g.mean(p), g.add(g.mean(g.minimum(q, q2v)), g.mean(q2v)));
                    g.backward(loss, pp);
                    popt.step();
                }
            }
            auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
            double per = dt / iters * 1e3;
            std::printf("h=%3ld B=%3ld  %7.3f ms/update  -> 100K steps = %6.1f min\n", h, B,
                        per, per * 100000.0 / 60000.0);
        }
    }
    return 0;
}
