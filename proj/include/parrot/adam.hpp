#pragma once

#include <vector>

#include "parrot/graph.hpp"

namespace parrot::nd {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Holds first/second moment estimates per
/// parameter; the step counter advances by exactly one per step().
class Adam {
  public:
    Adam(std::vector<Param*> params, AdamConfig cfg);

    /// Applies one update using each parameter's current grad.
    /// Throws NumericError (naming the parameter) on non-finite gradients.
    void step();

    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamConfig cfg_;
    long t_ = 0;
};

} // namespace parrot::nd
