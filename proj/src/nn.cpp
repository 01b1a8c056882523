#include "parrot/nn.hpp"

#include <cmath>

namespace parrot::nd {

void init_he(Param& p, long fan_in, Rng& rng) {
    double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (long i = 0; i < p.value.size(); ++i) p.value[i] = rng.normal(0.0, std);
}

void init_zero(Param& p) { p.value.fill(0.0); }

Mlp::Mlp(const std::string& name, long in, const std::vector<long>& hidden, long out) {
    long prev = in;
    for (size_t i = 0; i < hidden.size(); ++i) {
        layers.emplace_back(name + "/l" + std::to_string(i), prev, hidden[i]);
        prev = hidden[i];
    }
    layers.emplace_back(name + "/l" + std::to_string(hidden.size()), prev, out);
}

void Mlp::init(Rng& rng, bool zero_last) {
    for (size_t i = 0; i < layers.size(); ++i) {
        if (zero_last && i + 1 == layers.size()) {
            init_zero(layers[i].W);
        } else {
            init_he(layers[i].W, layers[i].W.value.shape()[0], rng);
        }
        init_zero(layers[i].b);
    }
}

Value Mlp::forward(Graph& g, Value x) const {
    Value h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(g, h);
        if (i + 1 < layers.size()) h = g.relu(h);
    }
    return h;
}

void Mlp::collect(std::vector<Param*>& out) {
    for (auto& l : layers) l.collect(out);
}

} // namespace parrot::nd
