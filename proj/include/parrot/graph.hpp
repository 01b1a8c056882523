#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "parrot/tensor.hpp"

namespace parrot::nd {

/// Named trainable parameter. Value and gradient live here, outside any
/// graph; graphs reference parameters and accumulate into `grad` on
/// backward. Parameters are copied, never shared, across threads.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {}

    long size() const { return value.size(); }
};

/// Define-by-run reverse-mode tape over a fixed primitive set. A graph is
/// rebuilt for every forward pass; backward walks nodes in exact reverse
/// construction order. Single-threaded by construction.
///
/// With grad disabled the same ops run value-only (no closures recorded),
/// which is used for target networks and environment rollouts.
class Graph {
  public:
    struct Value {
        int id = -1;
    };

    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    /// Constant input; receives no parameter gradient.
    Value leaf(Tensor t);

    /// Leaf bound to a parameter; backward accumulates into p.grad.
    Value param(Param& p);

    // Primitive set. Every op validates input shapes and checks its output
    // for non-finite values, which surface as NumericError.
    Value matmul(Value a, Value b);
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value add_row(Value m, Value row); // [r,c] + row vector of length c
    Value add_scalar(Value a, double c);
    Value scale(Value a, double c);
    Value neg(Value a);
    Value exp(Value a);
    Value tanh(Value a);
    Value relu(Value a);
    Value sum(Value a);     // -> [1,1]
    Value mean(Value a);    // -> [1,1]
    Value row_sum(Value a); // -> [r,1]
    /// Row-wise diagonal Gaussian log-density: x, mu, sigma all [r,d] -> [r,1].
    Value gaussian_log_density(Value x, Value mu, Value sigma);

    // Compositions of primitives (no new backward rules).
    Value clamp(Value a, double lo, double hi); // lo + relu(x-lo) - relu(x-hi)
    Value minimum(Value a, Value b);            // a - relu(a-b)

    const Tensor& value(Value v) const { return nodes_[static_cast<size_t>(v.id)].val; }
    double scalar_value(Value v) const;

    /// Gradient of the loss w.r.t. a node, valid after backward().
    const Tensor& grad_of(Value v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

    /// Reverse pass from a scalar loss. Every listed parameter gets
    /// dLoss/dParam written to its grad; parameters not reachable from the
    /// loss get exact zeros. Calling backward twice on one graph throws.
    void backward(Value loss, std::span<Param* const> params);

    size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor val;
        Tensor grad; // lazily sized on first accumulation
        Param* bound = nullptr;
        std::function<void()> back;
    };

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
    bool backward_done_ = false;

    Value push(Tensor val, const char* opname);
    Tensor& ensure_grad(int id);
    void check_finite(const Tensor& t, const char* opname) const;
    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
};

using Value = Graph::Value;

} // namespace parrot::nd
