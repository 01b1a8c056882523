#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "parrot/flow.hpp"
#include "test_util.hpp"

using namespace parrot;
using namespace parrot::flow;
using nd::Graph;
using nd::Param;
using nd::Rng;
using nd::Tensor;

namespace {

Param* find_param(std::vector<Param*>& params, const std::string& name) {
    for (Param* p : params)
        if (p->name == name) return p;
    REQUIRE(false);
    return nullptr;
}

std::vector<double> random_obs(long dim, Rng& rng) {
    std::vector<double> s(static_cast<size_t>(dim));
    for (double& x : s) x = rng.uniform(-1.0, 1.0);
    return s;
}

void randomize_model(FlowModel& m, Rng& rng, double scale) {
    for (Param* p : m.params()) testutil::fill_random(*p, rng, scale);
}

} // namespace

TEST_CASE("zero-initialized encoder maps any observation to zero features") {
    ConditionEncoder enc(5, 8);
    enc.init_zero();
    Rng rng(1);
    auto f = enc.encode(random_obs(5, rng));
    for (double x : f) CHECK(x == 0.0);
}

TEST_CASE("encoder is deterministic and locally smooth") {
    Rng rng(2);
    ConditionEncoder enc(5, 8);
    enc.init(rng);
    auto s = random_obs(5, rng);
    auto f1 = enc.encode(s);
    auto f2 = enc.encode(s);
    CHECK(f1 == f2); // bit-identical

    // weight-norm bound on the effect of a 1e-9 input perturbation
    double wnorm = 1.0;
    for (auto& l : enc.net.layers) {
        double n = 0;
        for (long i = 0; i < l.W.value.size(); ++i) n += l.W.value[i] * l.W.value[i];
        wnorm *= std::sqrt(n);
    }
    auto s2 = s;
    s2[0] += 1e-9;
    auto f3 = enc.encode(s2);
    double diff = 0;
    for (size_t i = 0; i < f1.size(); ++i) diff = std::max(diff, std::abs(f3[i] - f1[i]));
    CHECK(diff <= 1e-9 * wnorm * 10.0);
    CHECK(diff > 0.0);

    CHECK_THROWS_AS(enc.encode(std::vector<double>(4, 0.0)), nd::ShapeError);
}

TEST_CASE("zero-initialized flow is the identity with zero log det") {
    Rng rng(3);
    FlowModel m(3, 5);
    m.init(rng); // heads are zero-initialized; flow starts as identity
    auto s = random_obs(5, rng);
    std::vector<double> z = {0.4, -1.2, 2.0};
    auto a = m.forward_map(z, s);
    for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(z[i]).epsilon(1e-12));
    auto [zz, ld] = m.inverse_map(a, s);
    for (int i = 0; i < 3; ++i) CHECK(zz[i] == doctest::Approx(z[i]).epsilon(1e-12));
    CHECK(ld == 0.0);
}

TEST_CASE("coupling formula: constant v = ln 2, t = 1 on the second index") {
    // two layers so masks cover every index; second layer stays identity
    FlowModel m(2, 4);
    Rng rng(4);
    m.init(rng);
    auto params = m.params();
    const double c = m.clamp();
    double v_raw = c * std::atanh(std::log(2.0) / c);
    find_param(params, "flow/c0/v/b")->value[0] = v_raw;
    find_param(params, "flow/c0/t/b")->value[0] = 1.0;
    // zero the trunk of layer 0 so heads see exactly their bias
    find_param(params, "flow/c0/in/Wa")->value.fill(0.0);
    find_param(params, "flow/c0/in/Wb")->value.fill(0.0);
    find_param(params, "flow/c0/mid/W")->value.fill(0.0);

    auto s = random_obs(4, rng);
    auto a = m.forward_map({0.5, 1.0}, s);
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(3.0).epsilon(1e-9));

    auto [z, ld] = m.inverse_map({0.5, 3.0}, s);
    CHECK(z[0] == doctest::Approx(0.5));
    CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ld == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("random flow round-trips within 1e-6") {
    Rng rng(5);
    FlowModel m(3, 6);
    randomize_model(m, rng, 0.2);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> z(3);
        for (double& x : z) x = rng.uniform(-4.0, 4.0);
        auto s = random_obs(6, rng);
        auto a = m.forward_map(z, s);
        auto [zz, ld] = m.inverse_map(a, s);
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(zz[i] - z[i]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("log_det_inv matches the finite-difference Jacobian oracle") {
    Rng rng(6);
    for (long D : {2L, 3L, 5L}) {
        CAPTURE(D);
        FlowModel m(D, 4);
        randomize_model(m, rng, 0.15);
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            auto s = random_obs(4, rng);
            std::vector<double> a(static_cast<size_t>(D));
            for (double& x : a) x = rng.uniform(-2.0, 2.0);

            auto [z0, ld] = m.inverse_map(a, s);
            const double h = 1e-5;
            std::vector<std::vector<double>> jac(static_cast<size_t>(D),
                                                 std::vector<double>(static_cast<size_t>(D)));
            for (long j = 0; j < D; ++j) {
                auto ap = a, am = a;
                ap[static_cast<size_t>(j)] += h;
                am[static_cast<size_t>(j)] -= h;
                auto zp = m.inverse_map(ap, s).first;
                auto zm = m.inverse_map(am, s).first;
                for (long i = 0; i < D; ++i)
                    jac[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                        (zp[static_cast<size_t>(i)] - zm[static_cast<size_t>(i)]) / (2 * h);
            }
            double det = testutil::determinant(jac);
            double ref = std::log(std::abs(det));
            worst = std::max(worst, std::abs(ld - ref) / std::max(1e-12, std::abs(ref)));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("log_prob equals base density plus log det and matches known values") {
    Rng rng(7);
    FlowModel m(3, 5);
    m.init(rng); // identity flow
    auto s = random_obs(5, rng);
    CHECK(m.log_prob({0, 0, 0}, s) == doctest::Approx(-2.756815).epsilon(1e-6));
    CHECK(m.log_prob({1, 0, 0}, s) == doctest::Approx(-3.256815).epsilon(1e-6));

    randomize_model(m, rng, 0.4);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> a = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        auto [z, ld] = m.inverse_map(a, s);
        double base = 0.0;
        for (double zi : z) base += -0.5 * std::log(2 * M_PI) - 0.5 * zi * zi;
        CHECK(m.log_prob(a, s) == doctest::Approx(base + ld).epsilon(1e-12));
    }
}

TEST_CASE("density integrates to one on a grid (D=2)") {
    Rng rng(8);
    FlowModel m(2, 3);
    randomize_model(m, rng, 0.08);
    auto s = random_obs(3, rng);

    const double lo = -5.0, hi = 5.0;
    const long n = 200;
    const double step = (hi - lo) / static_cast<double>(n);
    // batch the grid rows through the graph path
    double integral = 0.0;
    Tensor obs_row = Tensor::row(s);
    for (long i = 0; i < n; ++i) {
        Tensor acts(std::vector<long>{n, 2});
        Tensor obs(std::vector<long>{n, 3});
        double x = lo + (static_cast<double>(i) + 0.5) * step;
        for (long j = 0; j < n; ++j) {
            acts.at(j, 0) = x;
            acts.at(j, 1) = lo + (static_cast<double>(j) + 0.5) * step;
            for (long k = 0; k < 3; ++k) obs.at(j, k) = s[static_cast<size_t>(k)];
        }
        Graph g(false);
        auto lp = m.log_prob_graph(g, g.leaf(std::move(acts)), g.leaf(std::move(obs)));
        const Tensor& v = g.value(lp);
        for (long j = 0; j < n; ++j) integral += std::exp(v[j]) * step * step;
    }
    CHECK(std::abs(integral - 1.0) < 1e-2);
}

TEST_CASE("identity flow samples are standard normal (KS) and seed-reproducible") {
    Rng rng(9);
    FlowModel m(3, 4);
    m.init(rng);
    auto s = random_obs(4, rng);

    const int n = 10000;
    std::vector<std::vector<double>> coords(3);
    Rng sample_rng(123);
    for (int i = 0; i < n; ++i) {
        auto a = m.sample(s, sample_rng);
        for (int d = 0; d < 3; ++d) coords[static_cast<size_t>(d)].push_back(a[static_cast<size_t>(d)]);
    }
    // KS critical value at alpha = 0.01 for n = 10^4
    const double crit = 1.628 / std::sqrt(static_cast<double>(n));
    for (int d = 0; d < 3; ++d)
        CHECK(testutil::ks_statistic_normal(coords[static_cast<size_t>(d)]) < crit);

    Rng r1(77), r2(77);
    auto a1 = m.sample(s, r1);
    auto a2 = m.sample(s, r2);
    CHECK(a1 == a2);
}

TEST_CASE("NLL gradient matches finite differences on a fixed batch") {
    Rng rng(10);
    FlowModel m(3, 4, /*feat=*/8, /*layers=*/4, /*hidden=*/12);
    randomize_model(m, rng, 0.15);
    auto params = m.params();

    Tensor obs = testutil::random_tensor({8, 4}, rng, 0.5);
    Tensor act = testutil::random_tensor({8, 3}, rng, 0.8);

    auto loss_fn = [&]() {
        Graph g;
        auto lp = m.log_prob_graph(g, g.leaf(act), g.leaf(obs));
        return g.scalar_value(g.neg(g.mean(lp)));
    };

    Graph g;
    auto lp = m.log_prob_graph(g, g.leaf(act), g.leaf(obs));
    auto loss = g.neg(g.mean(lp));
    g.backward(loss, params);
    std::vector<Tensor> analytic;
    for (Param* p : params) analytic.push_back(p->grad);

    auto fd = testutil::fd_gradient(loss_fn, params);
    for (size_t i = 0; i < params.size(); ++i) {
        CAPTURE(params[i]->name);
        CHECK(testutil::max_rel_err(analytic[i], fd[i], 1e-7) < 1e-5);
    }
}

TEST_CASE("training on standard normal data reaches the analytic entropy") {
    Rng rng(11);
    const long D = 3, S = 4, N = 20000;
    Tensor obs = testutil::random_tensor({N, S}, rng, 1.0);
    Tensor act = testutil::random_tensor({N, D}, rng, 1.0);

    FlowModel m(D, S);
    m.init(rng);
    PriorTrainConfig cfg;
    cfg.steps = 800;
    cfg.batch_size = 128;
    cfg.learning_rate = 1e-3;
    cfg.eval_every = 400;
    auto curve = train_prior(m, obs, act, cfg);

    const double entropy_per_dim = 0.5 * std::log(2 * M_PI * std::exp(1.0)); // 1.4189
    CHECK(std::abs(curve.final_val_nll / static_cast<double>(D) - entropy_per_dim) < 0.1);
}

TEST_CASE("training on a tight offset mode beats the identity flow and concentrates samples") {
    Rng rng(12);
    const long D = 3, S = 4, N = 20000;
    Tensor obs = testutil::random_tensor({N, S}, rng, 1.0);
    Tensor act(std::vector<long>{N, D});
    for (long i = 0; i < act.size(); ++i) act[i] = 0.5 + 0.01 * rng.normal();

    FlowModel m(D, S);
    m.init(rng);
    double identity_nll = mean_nll(m, obs, act);

    PriorTrainConfig cfg;
    cfg.steps = 4000;
    cfg.batch_size = 128;
    cfg.learning_rate = 3e-3;
    cfg.eval_every = 1000;
    auto curve = train_prior(m, obs, act, cfg);

    CHECK(curve.final_val_nll < identity_nll - 3.0);
    CHECK(curve.final_val_nll < curve.init_val_nll);

    Rng srng(99);
    double max_dev = 0.0;
    std::vector<double> s(static_cast<size_t>(S), 0.3);
    for (int i = 0; i < 200; ++i) {
        auto a = m.sample(s, srng);
        for (double x : a) max_dev = std::max(max_dev, std::abs(x - 0.5));
    }
    CHECK(max_dev < 0.25);
}

TEST_CASE("conditional bimodal data: samples recover the mode selected by the observation") {
    Rng rng(13);
    const long D = 3, S = 4, N = 30000;
    Tensor obs(std::vector<long>{N, S});
    Tensor act(std::vector<long>{N, D});
    for (long i = 0; i < N; ++i) {
        bool bit = rng.uniform01() < 0.5;
        obs.at(i, 0) = bit ? 1.0 : 0.0;
        for (long k = 1; k < S; ++k) obs.at(i, k) = rng.uniform(-1.0, 1.0);
        act.at(i, 0) = (bit ? 0.5 : -0.5) + 0.02 * rng.normal();
        for (long k = 1; k < D; ++k) act.at(i, k) = 0.02 * rng.normal();
    }

    FlowModel m(D, S);
    m.init(rng);
    PriorTrainConfig cfg;
    cfg.steps = 6000;
    cfg.batch_size = 128;
    cfg.learning_rate = 3e-3;
    cfg.eval_every = 2000;
    train_prior(m, obs, act, cfg);

    Rng srng(101);
    for (double bit : {1.0, 0.0}) {
        std::vector<double> s = {bit, 0.2, -0.4, 0.6};
        int correct = 0;
        const int n = 400;
        for (int i = 0; i < n; ++i) {
            auto a = m.sample(s, srng);
            double want = bit > 0.5 ? 0.5 : -0.5;
            if (std::abs(a[0] - want) < std::abs(a[0] + want)) ++correct;
        }
        CHECK(correct >= static_cast<int>(0.95 * n));
    }
}

TEST_CASE("flow checkpoint round-trips through the sidecar") {
    Rng rng(14);
    FlowModel m(3, 7, 16, 4, 32, 4.0);
    randomize_model(m, rng, 0.3);
    auto dir = std::filesystem::temp_directory_path();
    auto path = (dir / "parrot_flow_test.ndif").string();
    save_flow(path, m, {{"note", "test"}});

    FlowModel m2 = load_flow(path);
    CHECK(m2.action_dim() == 3);
    CHECK(m2.obs_dim() == 7);
    CHECK(m2.feat_dim() == 16);
    CHECK(m2.clamp() == 4.0);
    Rng r(5);
    auto s = random_obs(7, r);
    std::vector<double> z = {0.3, -0.7, 1.1};
    CHECK(m.forward_map(z, s) == m2.forward_map(z, s));

    std::filesystem::remove(path);
    std::filesystem::remove(path + ".meta");
}

TEST_CASE("non-finite inputs to the flow raise errors") {
    Rng rng(15);
    FlowModel m(3, 4);
    m.init(rng);
    auto s = random_obs(4, rng);
    std::vector<double> bad = {std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
    CHECK_THROWS_AS(m.forward_map(bad, s), nd::NumericError);
    CHECK_THROWS_AS(m.inverse_map(bad, s), nd::NumericError);
}
