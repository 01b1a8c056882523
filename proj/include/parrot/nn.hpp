#pragma once

#include <string>
#include <vector>

#include "parrot/graph.hpp"
#include "parrot/rng.hpp"

namespace parrot::nd {

void init_he(Param& p, long fan_in, Rng& rng);
void init_zero(Param& p);

/// Affine layer y = x W + b, W is [in, out], b is [1, out].
struct Linear {
    Param W;
    Param b;

    Linear() = default;
    Linear(const std::string& name, long in, long out)
        : W(name + "/W", Tensor(std::vector<long>{in, out})),
          b(name + "/b", Tensor(std::vector<long>{1, out})) {}

    Value forward(Graph& g, Value x) const {
        // Params are mutable leaves from the graph's point of view.
        Graph::Value w = g.param(const_cast<Param&>(W));
        Graph::Value bias = g.param(const_cast<Param&>(b));
        return g.add_row(g.matmul(x, w), bias);
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&W);
        out.push_back(&b);
    }
};

/// Affine layer over two inputs, y = a Wa + b Wb + bias. Stands in for
/// concatenation, which the primitive set does not provide.
struct PairLinear {
    Param Wa;
    Param Wb;
    Param b;

    PairLinear() = default;
    PairLinear(const std::string& name, long in_a, long in_b, long out)
        : Wa(name + "/Wa", Tensor(std::vector<long>{in_a, out})),
          Wb(name + "/Wb", Tensor(std::vector<long>{in_b, out})),
          b(name + "/b", Tensor(std::vector<long>{1, out})) {}

    Value forward(Graph& g, Value a, Value bb) const {
        Graph::Value wa = g.param(const_cast<Param&>(Wa));
        Graph::Value wb = g.param(const_cast<Param&>(Wb));
        Graph::Value bias = g.param(const_cast<Param&>(b));
        return g.add_row(g.add(g.matmul(a, wa), g.matmul(bb, wb)), bias);
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&Wa);
        out.push_back(&Wb);
        out.push_back(&b);
    }
};

/// Plain MLP with rectifier activations between layers and a linear output.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(const std::string& name, long in, const std::vector<long>& hidden, long out);

    void init(Rng& rng, bool zero_last = false);
    Value forward(Graph& g, Value x) const;
    void collect(std::vector<Param*>& out);
};

} // namespace parrot::nd
