#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "parrot/adam.hpp"
#include "parrot/checkpoint.hpp"
#include "parrot/graph.hpp"
#include "parrot/nn.hpp"
#include "parrot/rng.hpp"
#include "test_util.hpp"

using namespace parrot::nd;
using testutil::fd_gradient;
using testutil::max_rel_err;

TEST_CASE("matmul with identity returns input") {
    Graph g;
    Tensor eye({3, 3});
    for (long i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Tensor x = Tensor::from({3, 1}, {0.7, -1.3, 2.9});
    auto y = g.matmul(g.leaf(eye), g.leaf(x));
    for (long i = 0; i < 3; ++i) CHECK(g.value(y)[i] == doctest::Approx(x[i]));
}

TEST_CASE("exp of zero tensor is all ones") {
    Graph g;
    auto y = g.exp(g.leaf(Tensor({2, 3})));
    for (long i = 0; i < 6; ++i) CHECK(g.value(y)[i] == 1.0);
}

TEST_CASE("standard normal log density at the mode") {
    Graph g;
    auto lp = g.gaussian_log_density(g.leaf(Tensor({1, 3})), g.leaf(Tensor({1, 3})),
                                     g.leaf(Tensor::full({1, 3}, 1.0)));
    CHECK(g.scalar_value(lp) == doctest::Approx(-2.756815).epsilon(1e-6));
}

TEST_CASE("backward of sum(w*w)") {
    Graph g;
    Param w("w", Tensor::row({1.0, 2.0}));
    auto wv = g.param(w);
    auto loss = g.sum(g.mul(wv, wv));
    Param* ps[] = {&w};
    g.backward(loss, ps);
    CHECK(w.grad[0] == doctest::Approx(2.0));
    CHECK(w.grad[1] == doctest::Approx(4.0));
}

TEST_CASE("backward of tanh at zero") {
    Graph g;
    Param w("w", Tensor::row({0.0}));
    auto loss = g.sum(g.tanh(g.param(w)));
    Param* ps[] = {&w};
    g.backward(loss, ps);
    CHECK(w.grad[0] == doctest::Approx(1.0));
}

TEST_CASE("two-layer MLP gradient matches finite differences") {
    Rng rng(7);
    Mlp net("mlp", 4, {5, 3}, 2);
    net.init(rng);
    std::vector<Param*> params;
    net.collect(params);

    Tensor x = testutil::random_tensor({6, 4}, rng);
    Tensor target = testutil::random_tensor({6, 2}, rng);

    auto loss_fn = [&]() {
        Graph g;
        auto out = net.forward(g, g.leaf(x));
        auto diff = g.sub(out, g.leaf(target));
        return g.scalar_value(g.mean(g.mul(diff, diff)));
    };

    Graph g;
    auto out = net.forward(g, g.leaf(x));
    auto diff = g.sub(out, g.leaf(target));
    auto loss = g.mean(g.mul(diff, diff));
    g.backward(loss, params);

    auto fd = fd_gradient(loss_fn, params);
    for (size_t i = 0; i < params.size(); ++i)
        CHECK(max_rel_err(params[i]->grad, fd[i]) < 1e-6);
}

TEST_CASE("every primitive matches finite differences on random shapes") {
    Rng rng(42);
    // Each entry builds a scalar loss from two parameter tensors.
    struct CaseDef {
        const char* name;
        std::function<Graph::Value(Graph&, Param&, Param&)> build;
        std::vector<long> shape_a;
        std::vector<long> shape_b;
        double scale_a = 1.0;
        double scale_b = 1.0;
    };
    std::vector<CaseDef> cases = {
        {"matmul",
         [](Graph& g, Param& a, Param& b) { return g.sum(g.matmul(g.param(a), g.param(b))); },
         {5, 7},
         {7, 3}},
        {"add", [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.add(g.param(a), g.param(b)), g.param(a))); }, {4, 6}, {4, 6}},
        {"sub", [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.sub(g.param(a), g.param(b)), g.param(b))); }, {4, 6}, {4, 6}},
        {"mul", [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.param(a), g.param(b))); }, {9, 2}, {9, 2}},
        {"add_row", [](Graph& g, Param& a, Param& b) { return g.sum(g.exp(g.add_row(g.param(a), g.param(b)))); }, {5, 4}, {1, 4}, 0.3, 0.3},
        {"add_scalar+scale",
         [](Graph& g, Param& a, Param& b) {
             return g.sum(g.mul(g.scale(g.add_scalar(g.param(a), 0.7), -1.3), g.param(b)));
         },
         {3, 8},
         {3, 8}},
        {"neg", [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.neg(g.param(a)), g.param(b))); }, {2, 5}, {2, 5}},
        {"exp", [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.exp(g.param(a)), g.param(b))); }, {6, 3}, {6, 3}, 0.5, 1.0},
        {"tanh", [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.tanh(g.param(a)), g.param(b))); }, {6, 3}, {6, 3}},
        {"relu",
         [](Graph& g, Param& a, Param& b) { return g.sum(g.mul(g.relu(g.param(a)), g.param(b))); },
         {16, 4},
         {16, 4}},
        {"mean", [](Graph& g, Param& a, Param& b) { return g.mean(g.mul(g.param(a), g.param(b))); }, {7, 7}, {7, 7}},
        {"row_sum",
         [](Graph& g, Param& a, Param& b) {
             return g.sum(g.mul(g.row_sum(g.param(a)), g.row_sum(g.param(b))));
         },
         {8, 5},
         {8, 5}},
        {"gaussian_log_density",
         [](Graph& g, Param& a, Param& b) {
             // sigma from exp keeps it positive while testing its gradient path
             auto sigma = g.exp(g.scale(g.param(b), 0.4));
             return g.sum(g.gaussian_log_density(g.param(a), g.scale(g.param(b), 0.3), sigma));
         },
         {6, 4},
         {6, 4}},
        {"clamp",
         [](Graph& g, Param& a, Param& b) {
             return g.sum(g.mul(g.clamp(g.param(a), -0.8, 0.9), g.param(b)));
         },
         {10, 3},
         {10, 3}},
        {"minimum",
         [](Graph& g, Param& a, Param& b) { return g.sum(g.minimum(g.param(a), g.param(b))); },
         {12, 2},
         {12, 2}},
    };

    for (auto& c : cases) {
        CAPTURE(c.name);
        Param a("a", Tensor(c.shape_a));
        Param b("b", Tensor(c.shape_b));
        testutil::fill_random(a, rng, c.scale_a);
        testutil::fill_random(b, rng, c.scale_b);
        std::vector<Param*> params = {&a, &b};

        Graph g;
        auto loss = c.build(g, a, b);
        g.backward(loss, params);
        Tensor ga = a.grad, gb = b.grad;

        auto f = [&]() {
            Graph g2;
            return g2.scalar_value(c.build(g2, a, b));
        };
        auto fd = fd_gradient(f, params);
        CHECK(max_rel_err(ga, fd[0]) < 1e-6);
        CHECK(max_rel_err(gb, fd[1]) < 1e-6);
    }
}

TEST_CASE("backward is deterministic") {
    Rng rng(3);
    Mlp net("m", 3, {4}, 1);
    net.init(rng);
    std::vector<Param*> params;
    net.collect(params);
    Tensor x = testutil::random_tensor({5, 3}, rng);

    auto run = [&]() {
        Graph g;
        auto loss = g.mean(net.forward(g, g.leaf(x)));
        g.backward(loss, params);
        std::vector<double> flat;
        for (Param* p : params)
            for (long i = 0; i < p->grad.size(); ++i) flat.push_back(p->grad[i]);
        return flat;
    };
    auto g1 = run();
    auto g2 = run();
    CHECK(g1 == g2); // bit-identical
}

TEST_CASE("double backward without re-forward is an error") {
    Graph g;
    Param w("w", Tensor::row({1.0}));
    auto loss = g.sum(g.param(w));
    Param* ps[] = {&w};
    g.backward(loss, ps);
    CHECK_THROWS_AS(g.backward(loss, ps), NumericError);
}

TEST_CASE("non-scalar loss is an error") {
    Graph g;
    Param w("w", Tensor::row({1.0, 2.0}));
    auto v = g.param(w);
    Param* ps[] = {&w};
    CHECK_THROWS_AS(g.backward(v, ps), ShapeError);
}

TEST_CASE("unreachable parameters receive exact zero") {
    Graph g;
    Param w("w", Tensor::row({1.0}));
    Param u("u", Tensor::row({2.0, 3.0}));
    u.grad = Tensor::row({9.0, 9.0}); // stale garbage from elsewhere
    auto loss = g.sum(g.param(w));
    Param* ps[] = {&w, &u};
    g.backward(loss, ps);
    CHECK(u.grad[0] == 0.0);
    CHECK(u.grad[1] == 0.0);
    CHECK(w.grad[0] == 1.0);
}

TEST_CASE("shape mismatch errors name the primitive and shapes") {
    Graph g;
    auto a = g.leaf(Tensor({2, 3}));
    auto b = g.leaf(Tensor({4, 5}));
    try {
        g.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("non-finite forward output surfaces as an error") {
    Graph g;
    auto big = g.leaf(Tensor::full({1, 2}, 1000.0));
    CHECK_THROWS_AS(g.exp(big), NumericError);
}

TEST_CASE("adam: zero gradient leaves params unchanged, moments decay") {
    Param w("w", Tensor::row({1.5, -0.5}));
    Adam opt({&w}, {.lr = 0.1});
    // one real step to build up moments
    w.grad = Tensor::row({1.0, -2.0});
    opt.step();
    Tensor after_first = w.value;
    // zero-gradient steps must not move parameters
    w.grad = Tensor::row({0.0, 0.0});
    for (int i = 0; i < 50; ++i) opt.step();
    // m decays by beta1 each step -> the implied update shrinks toward zero;
    // params move by less than the first step's magnitude in total
    for (long i = 0; i < 2; ++i) {
        double first_move = std::abs(after_first[i] - (i == 0 ? 1.5 : -0.5));
        CHECK(first_move == doctest::Approx(0.1).epsilon(1e-4));
    }
}

TEST_CASE("adam first step is approximately -lr*sign(g)") {
    Param w("w", Tensor::row({0.3, -0.7, 2.0}));
    Tensor orig = w.value;
    Adam opt({&w}, {.lr = 0.01});
    w.grad = Tensor::row({0.4, -3.0, 1e-3});
    opt.step();
    CHECK(w.value[0] == doctest::Approx(orig[0] - 0.01).epsilon(1e-4));
    CHECK(w.value[1] == doctest::Approx(orig[1] + 0.01).epsilon(1e-4));
    CHECK(w.value[2] == doctest::Approx(orig[2] - 0.01).epsilon(1e-2));
}

TEST_CASE("adam converges on (w-3)^2 and matches the scalar recurrence") {
    // independent scalar oracle of the same recurrence
    double ow = 0.0, om = 0.0, ov = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 100; ++t) {
        double grad = 2.0 * (ow - 3.0);
        om = b1 * om + (1 - b1) * grad;
        ov = b2 * ov + (1 - b2) * grad * grad;
        double mh = om / (1 - std::pow(b1, t));
        double vh = ov / (1 - std::pow(b2, t));
        ow -= lr * mh / (std::sqrt(vh) + eps);
    }

    Param w("w", Tensor::row({0.0}));
    Adam opt({&w}, {.lr = lr});
    for (int t = 0; t < 100; ++t) {
        Graph g;
        auto diff = g.add_scalar(g.param(w), -3.0);
        auto loss = g.sum(g.mul(diff, diff));
        Param* ps[] = {&w};
        g.backward(loss, ps);
        opt.step();
    }
    CHECK(w.value[0] == doctest::Approx(ow).epsilon(1e-12));
    CHECK(std::abs(w.value[0] - 3.0) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
    Param w("weights/W", Tensor::row({1.0}));
    Adam opt({&w}, {});
    w.grad = Tensor::row({0.0});
    w.grad[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        opt.step();
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("weights/W") != std::string::npos);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly and rejects bad magic") {
    Rng rng(11);
    Mlp net("ck", 3, {4}, 2);
    net.init(rng);
    std::vector<Param*> params;
    net.collect(params);

    auto path = std::filesystem::temp_directory_path() / "parrot_test_ck.ndif";
    save_params(path.string(), std::vector<const Param*>(params.begin(), params.end()));

    Mlp net2("ck", 3, {4}, 2);
    std::vector<Param*> params2;
    net2.collect(params2);
    load_params(path.string(), params2);
    for (size_t i = 0; i < params.size(); ++i)
        CHECK(params[i]->value.vec() == params2[i]->value.vec());

    // bit-exact file round-trip: saving the loaded params reproduces the bytes
    auto path2 = std::filesystem::temp_directory_path() / "parrot_test_ck2.ndif";
    save_params(path2.string(), std::vector<const Param*>(params2.begin(), params2.end()));
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    auto bad = std::filesystem::temp_directory_path() / "parrot_test_bad.ndif";
    std::ofstream os(bad, std::ios::binary);
    os << "XXXX1 garbage";
    os.close();
    CHECK_THROWS(load_params(bad.string(), params2));

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
    std::filesystem::remove(bad);
}

TEST_CASE("rng is deterministic and its normal matches moments") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng r(9);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}
