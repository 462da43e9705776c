#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <vector>

#include "lmpm/tensor.hpp"

namespace lmpm::ad {

// Reverse-mode tape. Ops append one closure per node in forward order;
// backward() replays them in reverse. Passing a null Tape* to an op runs it
// in inference mode (no recording, no grad propagation).
class Tape {
public:
    void record(std::function<void()> back) { backops_.push_back(std::move(back)); }

    std::size_t size() const { return backops_.size(); }

    // Seeds d(root)/d(root) = 1 and accumulates into every requires_grad
    // tensor reachable from the recorded ops.
    void backward(const TensorPtr& root) {
        if (root->numel() != 1) {
            throw ShapeError("backward root must be a scalar, got shape " + shape_str(root->shape));
        }
        root->ensure_grad();
        root->grad[0] += 1.0;
        for (auto it = backops_.rbegin(); it != backops_.rend(); ++it) (*it)();
    }

    void clear() { backops_.clear(); }

private:
    std::vector<std::function<void()>> backops_;
};

namespace detail {

inline bool track(Tape* tape, std::initializer_list<TensorPtr> inputs) {
    if (!tape) return false;
    for (const auto& t : inputs)
        if (t->requires_grad) return true;
    return false;
}

// Every recorded node gets its grad buffer up front: a node nothing consumes
// then propagates zeros on replay instead of reading an unallocated vector.
inline void mark_output(const TensorPtr& out) {
    out->requires_grad = true;
    out->ensure_grad();
}

inline void want_matrix(const TensorPtr& t, const char* who) {
    if (t->ndim() != 2) {
        throw ShapeError(std::string(who) + " expects a matrix, got shape " + shape_str(t->shape));
    }
}

inline void want_vector(const TensorPtr& t, const char* who) {
    if (t->ndim() != 1) {
        throw ShapeError(std::string(who) + " expects a vector, got shape " + shape_str(t->shape));
    }
}

}  // namespace detail

// ---- elementwise and linear algebra ----

inline TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    detail::want_matrix(a, "matmul lhs");
    detail::want_matrix(b, "matmul rhs");
    const int m = a->shape[0], k = a->shape[1];
    if (b->shape[0] != k) {
        throw ShapeError("matmul inner dimensions disagree: " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    }
    const int n = b->shape[1];
    auto out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = &a->data[static_cast<std::size_t>(i) * k];
        double* orow = &out->data[static_cast<std::size_t>(i) * n];
        for (int t = 0; t < k; ++t) {
            const double av = arow[t];
            const double* brow = &b->data[static_cast<std::size_t>(t) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    if (detail::track(tape, {a, b})) {
        detail::mark_output(out);
        tape->record([a, b, out, m, k, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const double* grow = &out->grad[static_cast<std::size_t>(i) * n];
                    double* arow = &a->grad[static_cast<std::size_t>(i) * k];
                    for (int t = 0; t < k; ++t) {
                        const double* brow = &b->data[static_cast<std::size_t>(t) * n];
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        arow[t] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int t = 0; t < k; ++t) {
                    double* brow = &b->grad[static_cast<std::size_t>(t) * n];
                    for (int i = 0; i < m; ++i) {
                        const double av = a->data[static_cast<std::size_t>(i) * k + t];
                        const double* grow = &out->grad[static_cast<std::size_t>(i) * n];
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

// v[k] * M[k x n] -> [n]
inline TensorPtr vecmat(Tape* tape, const TensorPtr& v, const TensorPtr& m) {
    detail::want_vector(v, "vecmat lhs");
    detail::want_matrix(m, "vecmat rhs");
    const int k = v->shape[0];
    if (m->shape[0] != k) {
        throw ShapeError("vecmat dimensions disagree: " + shape_str(v->shape) + " x " +
                         shape_str(m->shape));
    }
    const int n = m->shape[1];
    auto out = Tensor::zeros({n});
    for (int t = 0; t < k; ++t) {
        const double vv = v->data[t];
        const double* mrow = &m->data[static_cast<std::size_t>(t) * n];
        for (int j = 0; j < n; ++j) out->data[j] += vv * mrow[j];
    }
    if (detail::track(tape, {v, m})) {
        detail::mark_output(out);
        tape->record([v, m, out, k, n] {
            if (v->requires_grad) {
                v->ensure_grad();
                for (int t = 0; t < k; ++t) {
                    const double* mrow = &m->data[static_cast<std::size_t>(t) * n];
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += out->grad[j] * mrow[j];
                    v->grad[t] += acc;
                }
            }
            if (m->requires_grad) {
                m->ensure_grad();
                for (int t = 0; t < k; ++t) {
                    const double vv = v->data[t];
                    double* mrow = &m->grad[static_cast<std::size_t>(t) * n];
                    for (int j = 0; j < n; ++j) mrow[j] += vv * out->grad[j];
                }
            }
        });
    }
    return out;
}

inline TensorPtr transpose(Tape* tape, const TensorPtr& a) {
    detail::want_matrix(a, "transpose");
    const int m = a->shape[0], n = a->shape[1];
    auto out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->data[static_cast<std::size_t>(j) * m + i] = a->at(i, j);
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out, m, n] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    a->grad[static_cast<std::size_t>(i) * n + j] +=
                        out->grad[static_cast<std::size_t>(j) * m + i];
        });
    }
    return out;
}

inline TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw ShapeError("add shapes disagree: " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    if (detail::track(tape, {a, b})) {
        detail::mark_output(out);
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

// a[m x n] + bias[n], broadcast over rows.
inline TensorPtr add_bias(Tape* tape, const TensorPtr& a, const TensorPtr& bias) {
    detail::want_matrix(a, "add_bias lhs");
    detail::want_vector(bias, "add_bias bias");
    const int m = a->shape[0], n = a->shape[1];
    if (bias->shape[0] != n) {
        throw ShapeError("add_bias width mismatch: " + shape_str(a->shape) + " + " +
                         shape_str(bias->shape));
    }
    auto out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = a->at(i, j) + bias->data[j];
    if (detail::track(tape, {a, bias})) {
        detail::mark_output(out);
        tape->record([a, bias, out, m, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        bias->grad[j] += out->grad[static_cast<std::size_t>(i) * n + j];
            }
        });
    }
    return out;
}

inline TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw ShapeError("mul shapes disagree: " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    if (detail::track(tape, {a, b})) {
        detail::mark_output(out);
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i)
                    a->grad[i] += out->grad[i] * b->data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i)
                    b->grad[i] += out->grad[i] * a->data[i];
            }
        });
    }
    return out;
}

inline TensorPtr scale(Tape* tape, const TensorPtr& a, double c) {
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = c * a->data[i];
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out, c] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += c * out->grad[i];
        });
    }
    return out;
}

inline TensorPtr sum(Tape* tape, const TensorPtr& a) {
    double s = 0.0;
    for (double v : a->data) s += v;
    auto out = Tensor::scalar(s);
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[0];
        });
    }
    return out;
}

// ---- structural ops ----

inline TensorPtr concat(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    detail::want_vector(a, "concat lhs");
    detail::want_vector(b, "concat rhs");
    const int n = a->shape[0], m = b->shape[0];
    auto out = Tensor::zeros({n + m});
    std::copy(a->data.begin(), a->data.end(), out->data.begin());
    std::copy(b->data.begin(), b->data.end(), out->data.begin() + n);
    if (detail::track(tape, {a, b})) {
        detail::mark_output(out);
        tape->record([a, b, out, n, m] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < n; ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < m; ++i) b->grad[i] += out->grad[n + i];
            }
        });
    }
    return out;
}

// Stacks parts vertically; a vector part contributes one row.
inline TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows needs at least one part");
    const int n = parts[0]->cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p->cols() != n) {
            throw ShapeError("concat_rows width mismatch: " + shape_str(parts[0]->shape) +
                             " vs " + shape_str(p->shape));
        }
        total += p->rows();
    }
    auto out = Tensor::zeros({total, n});
    int r = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(),
                  out->data.begin() + static_cast<std::size_t>(r) * n);
        r += p->rows();
    }
    bool need = false;
    if (tape) {
        for (const auto& p : parts) need = need || p->requires_grad;
    }
    if (need) {
        detail::mark_output(out);
        tape->record([parts, out, n] {
            int r = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    const std::size_t off = static_cast<std::size_t>(r) * n;
                    for (std::size_t i = 0; i < p->data.size(); ++i)
                        p->grad[i] += out->grad[off + i];
                }
                r += p->rows();
            }
        });
    }
    return out;
}

inline TensorPtr slice_rows(Tape* tape, const TensorPtr& a, int r0, int r1) {
    detail::want_matrix(a, "slice_rows");
    const int m = a->shape[0], n = a->shape[1];
    if (r0 < 0 || r1 <= r0 || r1 > m) {
        throw ShapeError("slice_rows range [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") out of bounds for shape " + shape_str(a->shape));
    }
    auto out = Tensor::zeros({r1 - r0, n});
    std::copy(a->data.begin() + static_cast<std::size_t>(r0) * n,
              a->data.begin() + static_cast<std::size_t>(r1) * n, out->data.begin());
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out, r0, n] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            const std::size_t off = static_cast<std::size_t>(r0) * n;
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[off + i] += out->grad[i];
        });
    }
    return out;
}

inline TensorPtr row(Tape* tape, const TensorPtr& a, int i) {
    detail::want_matrix(a, "row");
    const int m = a->shape[0], n = a->shape[1];
    if (i < 0 || i >= m) {
        throw IndexError("row index " + std::to_string(i) + " out of range for shape " +
                         shape_str(a->shape));
    }
    auto out = Tensor::zeros({n});
    std::copy(a->data.begin() + static_cast<std::size_t>(i) * n,
              a->data.begin() + static_cast<std::size_t>(i + 1) * n, out->data.begin());
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out, i, n] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            const std::size_t off = static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) a->grad[off + j] += out->grad[j];
        });
    }
    return out;
}

inline TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table, const std::vector<int>& ids) {
    detail::want_matrix(table, "embedding_lookup table");
    const int v = table->shape[0], d = table->shape[1];
    if (ids.empty()) throw ShapeError("embedding_lookup with empty id sequence");
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw IndexError("embedding id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
        }
    }
    const int t = static_cast<int>(ids.size());
    auto out = Tensor::zeros({t, d});
    for (int i = 0; i < t; ++i) {
        std::copy(table->data.begin() + static_cast<std::size_t>(ids[i]) * d,
                  table->data.begin() + static_cast<std::size_t>(ids[i] + 1) * d,
                  out->data.begin() + static_cast<std::size_t>(i) * d);
    }
    if (detail::track(tape, {table})) {
        detail::mark_output(out);
        tape->record([table, out, ids, d] {
            if (!table->requires_grad) return;
            table->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const std::size_t src = i * d;
                const std::size_t dst = static_cast<std::size_t>(ids[i]) * d;
                for (int j = 0; j < d; ++j) table->grad[dst + j] += out->grad[src + j];
            }
        });
    }
    return out;
}

// ---- nonlinearities ----

inline TensorPtr gelu(Tape* tape, const TensorPtr& a) {
    constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        const double x = a->data[i];
        out->data[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            const double inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi;
            for (std::size_t i = 0; i < a->data.size(); ++i) {
                const double x = a->data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                const double pdf = std::exp(-0.5 * x * x) * inv_sqrt_2pi;
                a->grad[i] += out->grad[i] * (cdf + x * pdf);
            }
        });
    }
    return out;
}

namespace detail {

// Shared row-wise softmax with max-subtraction; works in place on out.
inline void softmax_rows_forward(const Tensor& in, Tensor& out) {
    const int rows = in.rows(), n = in.cols();
    for (int r = 0; r < rows; ++r) {
        const double* x = &in.data[static_cast<std::size_t>(r) * n];
        double* y = &out.data[static_cast<std::size_t>(r) * n];
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (int j = 0; j < n; ++j) y[j] /= z;
    }
}

}  // namespace detail

// Softmax over the last dimension (each row of a matrix, or a whole vector).
inline TensorPtr softmax(Tape* tape, const TensorPtr& a) {
    auto out = Tensor::zeros(a->shape);
    detail::softmax_rows_forward(*a, *out);
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            const int rows = out->rows(), n = out->cols();
            for (int r = 0; r < rows; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += out->grad[off + j] * out->data[off + j];
                for (int j = 0; j < n; ++j)
                    a->grad[off + j] += out->data[off + j] * (out->grad[off + j] - dot);
            }
        });
    }
    return out;
}

inline TensorPtr log_softmax(Tape* tape, const TensorPtr& a) {
    auto out = Tensor::zeros(a->shape);
    const int rows = a->rows(), n = a->cols();
    for (int r = 0; r < rows; ++r) {
        const double* x = &a->data[static_cast<std::size_t>(r) * n];
        double* y = &out->data[static_cast<std::size_t>(r) * n];
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(x[j] - mx);
        const double lse = mx + std::log(z);
        for (int j = 0; j < n; ++j) y[j] = x[j] - lse;
    }
    if (detail::track(tape, {a})) {
        detail::mark_output(out);
        tape->record([a, out, rows, n] {
            if (!a->requires_grad) return;
            a->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * n;
                double gsum = 0.0;
                for (int j = 0; j < n; ++j) gsum += out->grad[off + j];
                for (int j = 0; j < n; ++j)
                    a->grad[off + j] += out->grad[off + j] - std::exp(out->data[off + j]) * gsum;
            }
        });
    }
    return out;
}

// Row-wise layer normalization with learned gain/bias.
inline TensorPtr layer_norm(Tape* tape, const TensorPtr& a, const TensorPtr& gain,
                            const TensorPtr& bias, double eps = 1e-5) {
    detail::want_matrix(a, "layer_norm input");
    detail::want_vector(gain, "layer_norm gain");
    detail::want_vector(bias, "layer_norm bias");
    const int m = a->shape[0], n = a->shape[1];
    if (gain->shape[0] != n || bias->shape[0] != n) {
        throw ShapeError("layer_norm parameter width mismatch for input " + shape_str(a->shape));
    }
    auto out = Tensor::zeros({m, n});
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
    auto inv_sigma = std::make_shared<std::vector<double>>(m);
    for (int r = 0; r < m; ++r) {
        const double* x = &a->data[static_cast<std::size_t>(r) * n];
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[r] = is;
        for (int j = 0; j < n; ++j) {
            const double h = (x[j] - mean) * is;
            (*xhat)[static_cast<std::size_t>(r) * n + j] = h;
            out->at(r, j) = h * gain->data[j] + bias->data[j];
        }
    }
    if (detail::track(tape, {a, gain, bias})) {
        detail::mark_output(out);
        tape->record([a, gain, bias, out, xhat, inv_sigma, m, n] {
            for (int r = 0; r < m; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * n;
                const double* dy = &out->grad[off];
                const double* h = &(*xhat)[off];
                if (gain->requires_grad) {
                    gain->ensure_grad();
                    for (int j = 0; j < n; ++j) gain->grad[j] += dy[j] * h[j];
                }
                if (bias->requires_grad) {
                    bias->ensure_grad();
                    for (int j = 0; j < n; ++j) bias->grad[j] += dy[j];
                }
                if (a->requires_grad) {
                    a->ensure_grad();
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double dh = dy[j] * gain->data[j];
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= n;
                    mean_dh_h /= n;
                    for (int j = 0; j < n; ++j) {
                        const double dh = dy[j] * gain->data[j];
                        a->grad[off + j] += (*inv_sigma)[r] * (dh - mean_dh - h[j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

// ---- losses ----

// Sum over positions of -log softmax(logits_t)[target_t]; no length averaging.
inline TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits, const std::vector<int>& targets) {
    detail::want_matrix(logits, "cross_entropy logits");
    const int t = logits->shape[0], v = logits->shape[1];
    if (static_cast<int>(targets.size()) != t) {
        throw InputError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(t) + " logit rows");
    }
    for (int id : targets) {
        if (id < 0 || id >= v) {
            throw IndexError("cross_entropy target id " + std::to_string(id) +
                             " out of range [0," + std::to_string(v) + ")");
        }
    }
    auto probs = std::make_shared<Tensor>(logits->shape);
    detail::softmax_rows_forward(*logits, *probs);
    double loss = 0.0;
    for (int r = 0; r < t; ++r) {
        loss -= std::log(std::max(probs->at(r, targets[r]), 1e-300));
    }
    auto out = Tensor::scalar(loss);
    if (detail::track(tape, {logits})) {
        detail::mark_output(out);
        tape->record([logits, probs, out, targets, t, v] {
            if (!logits->requires_grad) return;
            logits->ensure_grad();
            const double g = out->grad[0];
            for (int r = 0; r < t; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * v;
                for (int j = 0; j < v; ++j) logits->grad[off + j] += g * probs->data[off + j];
                logits->grad[off + targets[r]] -= g;
            }
        });
    }
    return out;
}

// Order-free negative log likelihood of a bag of ids under one logits vector:
// |bag| * logsumexp(logits) - sum_t logits[id_t].
inline TensorPtr nll_bag(Tape* tape, const TensorPtr& logits, const std::vector<int>& ids) {
    detail::want_vector(logits, "nll_bag logits");
    const int v = logits->shape[0];
    if (ids.empty()) throw InputError("nll_bag: empty target bag");
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw IndexError("nll_bag target id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
        }
    }
    auto probs = std::make_shared<Tensor>(logits->shape);
    detail::softmax_rows_forward(*logits, *probs);
    double mx = logits->data[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, logits->data[j]);
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(logits->data[j] - mx);
    const double lse = mx + std::log(z);
    double loss = static_cast<double>(ids.size()) * lse;
    for (int id : ids) loss -= logits->data[id];
    auto out = Tensor::scalar(loss);
    if (detail::track(tape, {logits})) {
        detail::mark_output(out);
        tape->record([logits, probs, out, ids, v] {
            if (!logits->requires_grad) return;
            logits->ensure_grad();
            const double g = out->grad[0];
            const double count = static_cast<double>(ids.size());
            for (int j = 0; j < v; ++j) logits->grad[j] += g * count * probs->data[j];
            for (int id : ids) logits->grad[id] -= g;
        });
    }
    return out;
}

// Additive attention mask: 0 on allowed positions, -inf on banned ones.
inline TensorPtr causal_mask(int t) {
    auto m = Tensor::zeros({t, t});
    const double ninf = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < t; ++i)
        for (int j = i + 1; j < t; ++j) m->at(i, j) = ninf;
    return m;
}

}  // namespace lmpm::ad
