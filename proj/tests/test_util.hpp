#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "parrot/graph.hpp"
#include "parrot/rng.hpp"

namespace testutil {

using parrot::nd::Param;
using parrot::nd::Tensor;

/// Central finite difference of a scalar function w.r.t. every entry of the
/// given parameters. The function must be a pure function of the parameter
/// values (re-run the forward pass inside).
inline std::vector<Tensor> fd_gradient(const std::function<double()>& f,
                                       const std::vector<Param*>& params, double h = 1e-5) {
    std::vector<Tensor> grads;
    for (Param* p : params) {
        Tensor g(p->value.shape());
        for (long i = 0; i < p->value.size(); ++i) {
            double orig = p->value[i];
            p->value[i] = orig + h;
            double fp = f();
            p->value[i] = orig - h;
            double fm = f();
            p->value[i] = orig;
            g[i] = (fp - fm) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Max relative error between analytic and FD gradients, ignoring
/// components whose reference magnitude is below `floor`.
inline double max_rel_err(const Tensor& analytic, const Tensor& fd, double floor = 1e-8) {
    double worst = 0.0;
    for (long i = 0; i < analytic.size(); ++i) {
        double ref = std::max(std::abs(fd[i]), std::abs(analytic[i]));
        if (ref < floor) continue;
        double err = std::abs(analytic[i] - fd[i]) / ref;
        worst = std::max(worst, err);
    }
    return worst;
}

inline void fill_random(Param& p, parrot::nd::Rng& rng, double scale = 1.0) {
    for (long i = 0; i < p.value.size(); ++i) p.value[i] = rng.normal(0.0, scale);
}

inline Tensor random_tensor(std::vector<long> shape, parrot::nd::Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (long i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, scale);
    return t;
}

/// Determinant via partial-pivot LU; oracle-side helper for small matrices.
inline double determinant(std::vector<std::vector<double>> m) {
    const size_t n = m.size();
    double det = 1.0;
    for (size_t k = 0; k < n; ++k) {
        size_t piv = k;
        for (size_t i = k + 1; i < n; ++i)
            if (std::abs(m[i][k]) > std::abs(m[piv][k])) piv = i;
        if (piv != k) {
            std::swap(m[piv], m[k]);
            det = -det;
        }
        if (m[k][k] == 0.0) return 0.0;
        det *= m[k][k];
        for (size_t i = k + 1; i < n; ++i) {
            double f = m[i][k] / m[k][k];
            for (size_t j = k; j < n; ++j) m[i][j] -= f * m[k][j];
        }
    }
    return det;
}

/// One-sample Kolmogorov-Smirnov statistic against the standard normal CDF.
inline double ks_statistic_normal(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double cdf = 0.5 * std::erfc(-xs[i] / std::sqrt(2.0));
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::abs(cdf - lo), std::abs(hi - cdf)));
    }
    return d;
}

} // namespace testutil
