#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "lmpm/error.hpp"
#include "lmpm/rng.hpp"

namespace lmpm::ad {

// 1-D or 2-D row-major shapes; {n} is a vector, {m, n} a matrix, {1} a scalar.
using Shape = std::vector<int>;

inline int shape_numel(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense 64-bit float tensor with an optional gradient slot. Gradients are
// allocated lazily on first accumulation and always match data in length.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until ensure_grad()
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)) {
        validate_shape();
        data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    }
    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        validate_shape();
        if (static_cast<int>(data.size()) != shape_numel(shape)) {
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
    }

    int ndim() const { return static_cast<int>(shape.size()); }
    int numel() const { return shape_numel(shape); }
    // rows()/cols() view any tensor as a matrix; a vector is a single row.
    int rows() const { return ndim() == 2 ? shape[0] : 1; }
    int cols() const { return ndim() == 2 ? shape[1] : shape[0]; }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }

    void zero_grad() {
        if (!grad.empty()) grad.assign(grad.size(), 0.0);
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        for (double v : grad)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static TensorPtr zeros(Shape s) { return std::make_shared<Tensor>(std::move(s)); }

    static TensorPtr scalar(double v) {
        return std::make_shared<Tensor>(Shape{1}, std::vector<double>{v});
    }

    static TensorPtr from(Shape s, std::vector<double> values) {
        return std::make_shared<Tensor>(std::move(s), std::move(values));
    }

    // Trainable parameter, i.i.d. normal init.
    static TensorPtr param(Shape s, Rng& rng, double stddev = 0.02, double mean = 0.0) {
        auto t = std::make_shared<Tensor>(std::move(s));
        for (auto& v : t->data) v = rng.normal(mean, stddev);
        t->requires_grad = true;
        return t;
    }

    static TensorPtr param_const(Shape s, double value) {
        auto t = std::make_shared<Tensor>(std::move(s));
        for (auto& v : t->data) v = value;
        t->requires_grad = true;
        return t;
    }

private:
    void validate_shape() const {
        if (shape.empty() || shape.size() > 2) {
            throw ShapeError("tensor rank must be 1 or 2, got shape " + shape_str(shape));
        }
        for (int d : shape) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        }
    }
};

}  // namespace lmpm::ad
