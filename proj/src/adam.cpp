#include "parrot/adam.hpp"

#include <cmath>

namespace parrot::nd {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Param& p = *params_[k];
        if (p.grad.size() != p.value.size())
            throw ShapeError("adam_step: parameter '" + p.name + "' has no gradient");
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (long i = 0; i < p.value.size(); ++i) {
            double g = p.grad[i];
            if (!std::isfinite(g))
                throw NumericError("adam_step: non-finite gradient for parameter '" + p.name +
                                   "'");
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

} // namespace parrot::nd
