#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace parrot::nd {

/// Shape or dimensionality violation in a primitive. Message carries the
/// primitive name and the offending shapes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite value produced or consumed where finiteness is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of 64-bit floats. Graph operations treat every
/// tensor as a matrix: rank-1 data is read as a single row.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
        long n = 1;
        for (long d : shape_) {
            if (d < 0) throw ShapeError("Tensor: negative dimension");
            n *= d;
        }
        data_.assign(static_cast<size_t>(n), 0.0);
    }

    static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<long> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return full({1, 1}, v); }

    static Tensor row(std::vector<double> values) {
        Tensor t;
        t.shape_ = {1, static_cast<long>(values.size())};
        t.data_ = std::move(values);
        return t;
    }

    static Tensor from(std::vector<long> shape, std::vector<double> values) {
        Tensor t(std::move(shape));
        if (t.data_.size() != values.size())
            throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                             " values for shape " + t.shape_str());
        t.data_ = std::move(values);
        return t;
    }

    const std::vector<long>& shape() const { return shape_; }
    long rank() const { return static_cast<long>(shape_.size()); }
    long size() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    // Matrix view: rank-1 tensors are a single row.
    long rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    long cols() const {
        if (shape_.empty()) return 0;
        return shape_.size() == 2 ? shape_[1] : shape_[0];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    double& at(long r, long c) { return data_[static_cast<size_t>(r * cols() + c)]; }
    double at(long r, long c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

  private:
    std::vector<long> shape_;
    std::vector<double> data_;
};

} // namespace parrot::nd
