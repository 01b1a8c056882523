#include "parrot/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <unordered_set>

namespace parrot::nd {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

MapC emap(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
MapM emap(Tensor& t) { return MapM(t.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                     b.shape_str());
}

} // namespace

void Graph::check_finite(const Tensor& t, const char* opname) const {
    if (!t.all_finite())
        throw NumericError(std::string(opname) + ": non-finite value in output of shape " +
                           t.shape_str());
}

Graph::Value Graph::push(Tensor val, const char* opname) {
    check_finite(val, opname);
    Node n;
    n.val = std::move(val);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size() - 1)};
}

Tensor& Graph::ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) {
        Tensor g(std::vector<long>{n.val.rows(), n.val.cols()});
        n.grad = std::move(g);
    }
    return n.grad;
}

double Graph::scalar_value(Value v) const {
    const Tensor& t = value(v);
    if (t.size() != 1) throw ShapeError("scalar_value: tensor has shape " + t.shape_str());
    return t[0];
}

Graph::Value Graph::leaf(Tensor t) {
    if (t.empty()) throw ShapeError("leaf: empty tensor");
    check_finite(t, "leaf");
    Node n;
    n.val = std::move(t);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size() - 1)};
}

Graph::Value Graph::param(Param& p) {
    if (p.value.empty()) throw ShapeError("param: parameter '" + p.name + "' is empty");
    check_finite(p.value, "param");
    Node n;
    n.val = p.value;
    n.bound = grad_enabled_ ? &p : nullptr;
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size() - 1)};
}

Graph::Value Graph::matmul(Value a, Value b) {
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);
    if (A.cols() != B.rows()) shape_fail("matmul", A, B);
    Tensor C(std::vector<long>{A.rows(), B.cols()});
    emap(C).noalias() = emap(A) * emap(B);
    Value out = push(std::move(C), "matmul");
    if (grad_enabled_) {
        int ia = a.id, ib = b.id, io = out.id;
        nodes_.back().back = [this, ia, ib, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            emap(ensure_grad(ia)).noalias() += emap(g) * emap(val(ib)).transpose();
            emap(ensure_grad(ib)).noalias() += emap(val(ia)).transpose() * emap(g);
        };
    }
    return out;
}

Graph::Value Graph::add(Value a, Value b) {
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);
    if (!A.same_shape(B)) shape_fail("add", A, B);
    Tensor C = A;
    const double* pb = B.data();
    double* pc = C.data();
    for (long i = 0; i < C.size(); ++i) pc[i] += pb[i];
    Value out = push(std::move(C), "add");
    if (grad_enabled_) {
        int ia = a.id, ib = b.id, io = out.id;
        nodes_.back().back = [this, ia, ib, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            Tensor& ga = ensure_grad(ia);
            Tensor& gb = ensure_grad(ib);
            for (long i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        };
    }
    return out;
}

Graph::Value Graph::sub(Value a, Value b) {
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);
    if (!A.same_shape(B)) shape_fail("sub", A, B);
    Tensor C = A;
    const double* pb = B.data();
    double* pc = C.data();
    for (long i = 0; i < C.size(); ++i) pc[i] -= pb[i];
    Value out = push(std::move(C), "sub");
    if (grad_enabled_) {
        int ia = a.id, ib = b.id, io = out.id;
        nodes_.back().back = [this, ia, ib, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            Tensor& ga = ensure_grad(ia);
            Tensor& gb = ensure_grad(ib);
            for (long i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
        };
    }
    return out;
}

Graph::Value Graph::mul(Value a, Value b) {
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);
    if (!A.same_shape(B)) shape_fail("mul", A, B);
    Tensor C = A;
    const double* pb = B.data();
    double* pc = C.data();
    for (long i = 0; i < C.size(); ++i) pc[i] *= pb[i];
    Value out = push(std::move(C), "mul");
    if (grad_enabled_) {
        int ia = a.id, ib = b.id, io = out.id;
        nodes_.back().back = [this, ia, ib, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            const Tensor& A2 = val(ia);
            const Tensor& B2 = val(ib);
            Tensor& ga = ensure_grad(ia);
            Tensor& gb = ensure_grad(ib);
            for (long i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * B2[i];
                gb[i] += g[i] * A2[i];
            }
        };
    }
    return out;
}

Graph::Value Graph::add_row(Value m, Value row) {
    const Tensor& A = val(m.id);
    const Tensor& R = val(row.id);
    if (R.rows() != 1 || R.cols() != A.cols()) shape_fail("add_row", A, R);
    Tensor C = A;
    const long r = A.rows(), c = A.cols();
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) C[i * c + j] += R[j];
    Value out = push(std::move(C), "add_row");
    if (grad_enabled_) {
        int ia = m.id, ir = row.id, io = out.id;
        nodes_.back().back = [this, ia, ir, io, r, c] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            Tensor& ga = ensure_grad(ia);
            Tensor& gr = ensure_grad(ir);
            for (long i = 0; i < r; ++i)
                for (long j = 0; j < c; ++j) {
                    ga[i * c + j] += g[i * c + j];
                    gr[j] += g[i * c + j];
                }
        };
    }
    return out;
}

Graph::Value Graph::add_scalar(Value a, double s) {
    Tensor C = val(a.id);
    for (long i = 0; i < C.size(); ++i) C[i] += s;
    Value out = push(std::move(C), "add_scalar");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
    }
    return out;
}

Graph::Value Graph::scale(Value a, double s) {
    Tensor C = val(a.id);
    for (long i = 0; i < C.size(); ++i) C[i] *= s;
    Value out = push(std::move(C), "scale");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io, s] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < g.size(); ++i) ga[i] += s * g[i];
        };
    }
    return out;
}

Graph::Value Graph::neg(Value a) { return scale(a, -1.0); }

Graph::Value Graph::exp(Value a) {
    Tensor C = val(a.id);
    for (long i = 0; i < C.size(); ++i) C[i] = std::exp(C[i]);
    Value out = push(std::move(C), "exp");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            const Tensor& y = val(io);
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        };
    }
    return out;
}

Graph::Value Graph::tanh(Value a) {
    Tensor C = val(a.id);
    for (long i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
    Value out = push(std::move(C), "tanh");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            const Tensor& y = val(io);
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        };
    }
    return out;
}

Graph::Value Graph::relu(Value a) {
    Tensor C = val(a.id);
    for (long i = 0; i < C.size(); ++i) C[i] = C[i] > 0.0 ? C[i] : 0.0;
    Value out = push(std::move(C), "relu");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            const Tensor& x = val(ia);
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) ga[i] += g[i];
        };
    }
    return out;
}

Graph::Value Graph::sum(Value a) {
    const Tensor& A = val(a.id);
    double s = 0.0;
    for (long i = 0; i < A.size(); ++i) s += A[i];
    Value out = push(Tensor::scalar(s), "sum");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io] {
            double g = nodes_[static_cast<size_t>(io)].grad[0];
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < ga.size(); ++i) ga[i] += g;
        };
    }
    return out;
}

Graph::Value Graph::mean(Value a) {
    const Tensor& A = val(a.id);
    if (A.size() == 0) throw ShapeError("mean: empty tensor");
    double s = 0.0;
    for (long i = 0; i < A.size(); ++i) s += A[i];
    const double inv_n = 1.0 / static_cast<double>(A.size());
    Value out = push(Tensor::scalar(s * inv_n), "mean");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io, inv_n] {
            double g = nodes_[static_cast<size_t>(io)].grad[0] * inv_n;
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < ga.size(); ++i) ga[i] += g;
        };
    }
    return out;
}

Graph::Value Graph::row_sum(Value a) {
    const Tensor& A = val(a.id);
    const long r = A.rows(), c = A.cols();
    Tensor C(std::vector<long>{r, 1});
    for (long i = 0; i < r; ++i) {
        double s = 0.0;
        for (long j = 0; j < c; ++j) s += A[i * c + j];
        C[i] = s;
    }
    Value out = push(std::move(C), "row_sum");
    if (grad_enabled_) {
        int ia = a.id, io = out.id;
        nodes_.back().back = [this, ia, io, r, c] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            Tensor& ga = ensure_grad(ia);
            for (long i = 0; i < r; ++i)
                for (long j = 0; j < c; ++j) ga[i * c + j] += g[i];
        };
    }
    return out;
}

Graph::Value Graph::gaussian_log_density(Value x, Value mu, Value sigma) {
    static constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    const Tensor& X = val(x.id);
    const Tensor& M = val(mu.id);
    const Tensor& S = val(sigma.id);
    if (!X.same_shape(M)) shape_fail("gaussian_log_density", X, M);
    if (!X.same_shape(S)) shape_fail("gaussian_log_density", X, S);
    const long r = X.rows(), d = X.cols();
    Tensor C(std::vector<long>{r, 1});
    for (long i = 0; i < r; ++i) {
        double lp = -0.5 * kLog2Pi * static_cast<double>(d);
        for (long j = 0; j < d; ++j) {
            double s = S[i * d + j];
            if (!(s > 0.0))
                throw NumericError("gaussian_log_density: sigma must be positive, got " +
                                   std::to_string(s));
            double u = (X[i * d + j] - M[i * d + j]) / s;
            lp -= std::log(s) + 0.5 * u * u;
        }
        C[i] = lp;
    }
    Value out = push(std::move(C), "gaussian_log_density");
    if (grad_enabled_) {
        int ix = x.id, im = mu.id, is = sigma.id, io = out.id;
        nodes_.back().back = [this, ix, im, is, io, r, d] {
            const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
            const Tensor& X2 = val(ix);
            const Tensor& M2 = val(im);
            const Tensor& S2 = val(is);
            Tensor& gx = ensure_grad(ix);
            Tensor& gm = ensure_grad(im);
            Tensor& gs = ensure_grad(is);
            for (long i = 0; i < r; ++i) {
                double gi = g[i];
                for (long j = 0; j < d; ++j) {
                    long k = i * d + j;
                    double s = S2[k];
                    double diff = X2[k] - M2[k];
                    double dx = -diff / (s * s);
                    gx[k] += gi * dx;
                    gm[k] -= gi * dx;
                    gs[k] += gi * (diff * diff / (s * s * s) - 1.0 / s);
                }
            }
        };
    }
    return out;
}

Graph::Value Graph::clamp(Value a, double lo, double hi) {
    if (!(lo < hi)) throw ShapeError("clamp: lo must be < hi");
    Value shifted_lo = add_scalar(a, -lo);
    Value lifted = add_scalar(relu(shifted_lo), lo);
    Value over = relu(add_scalar(a, -hi));
    return sub(lifted, over);
}

Graph::Value Graph::minimum(Value a, Value b) { return sub(a, relu(sub(a, b))); }

void Graph::backward(Value loss, std::span<Param* const> params) {
    if (!grad_enabled_) throw NumericError("backward: graph was built with grad disabled");
    if (backward_done_)
        throw NumericError("backward: called twice on one graph without re-running forward");
    backward_done_ = true;

    const Tensor& lv = value(loss);
    if (lv.size() != 1)
        throw ShapeError("backward: loss must be scalar, got shape " + lv.shape_str());

    std::unordered_set<const Param*> listed;
    for (Param* p : params) {
        if (p->grad.size() != p->value.size()) p->grad = Tensor(p->value.shape());
        p->grad.fill(0.0);
        listed.insert(p);
    }

    ensure_grad(loss.id).fill(1.0);
    for (size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.back && !n.grad.empty()) n.back();
    }

    for (size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.bound && !n.grad.empty() && listed.count(n.bound)) {
            Tensor& pg = n.bound->grad;
            for (long k = 0; k < n.grad.size(); ++k) pg[k] += n.grad[k];
        }
    }
}

} // namespace parrot::nd
