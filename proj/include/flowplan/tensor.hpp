#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Dense row-major f64 tensor, rank 1 or 2 in practice. Plain kernels here;
// the autodiff tape in autodiff.hpp wraps them.

namespace flowplan {

class ShapeError : public std::invalid_argument {
public:
    ShapeError(const std::string& op, const std::string& detail)
        : std::invalid_argument(op + ": " + detail), op_(op) {}
    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), values(numel_of(shape), 0.0) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (numel_of(shape) != values.size()) {
            throw ShapeError("tensor", "value count " + std::to_string(values.size()) +
                                           " does not match shape " + shape_str(shape));
        }
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw ShapeError("tensor", "zero dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

    // Checked construction: rejects NaN/Inf.
    static Tensor checked(std::vector<std::size_t> s, std::vector<double> v) {
        Tensor t(std::move(s), std::move(v));
        for (double x : t.values) {
            if (!std::isfinite(x)) throw std::invalid_argument("tensor: non-finite value at construction");
        }
        return t;
    }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<std::size_t> s, double fill) {
        Tensor t(std::move(s));
        std::fill(t.values.begin(), t.values.end(), fill);
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    std::size_t numel() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return numel() == 1; }

    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const {
        if (shape.size() == 1) return shape[0];
        if (shape.size() == 2) return shape[1];
        throw ShapeError("cols", "rank-" + std::to_string(rank()) + " tensor " + shape_str(shape));
    }

    double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

    double item() const {
        if (!is_scalar()) throw ShapeError("item", "tensor " + shape_str(shape) + " is not scalar");
        return values[0];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double x : values) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }
    std::string shape_str() const { return shape_str(shape); }
};

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError(op, std::string("shape mismatch ") + a.shape_str() + " vs " + b.shape_str());
    }
}

inline double silu_scalar(double x) { return x / (1.0 + std::exp(-x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values[i] = a.values[i] + b.values[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values[i] = a.values[i] - b.values[i];
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values[i] = a.values[i] * b.values[i];
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values[i] = a.values[i] * s;
    return out;
}

inline Tensor silu(const Tensor& a) {
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values[i] = silu_scalar(a.values[i]);
    return out;
}

inline Tensor reduce_mean(const Tensor& a) {
    double sum = std::accumulate(a.values.begin(), a.values.end(), 0.0);
    return Tensor::scalar(sum / static_cast<double>(a.numel()));
}

// a [m x k] @ b [k x n] -> [m x n], ikj order so the inner loop runs over
// contiguous output/rhs rows.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul", "expects rank-2 operands, got " + a.shape_str() + " and " + b.shape_str());
    }
    if (a.shape[1] != b.shape[0]) {
        throw ShapeError("matmul", "inner dims differ " + a.shape_str() + " vs " + b.shape_str());
    }
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out({m, n});
    const double* pa = a.values.data();
    const double* pb = b.values.data();
    double* pc = out.values.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose", "expects rank-2, got " + a.shape_str());
    Tensor out({a.shape[1], a.shape[0]});
    for (std::size_t i = 0; i < a.shape[0]; ++i) {
        for (std::size_t j = 0; j < a.shape[1]; ++j) out.at(j, i) = a.at(i, j);
    }
    return out;
}

// Adds bias [n] to every row of x [m x n].
inline Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.numel() != x.shape[1]) {
        throw ShapeError("add_rowwise", "bias " + bias.shape_str() + " does not match rows of " + x.shape_str());
    }
    Tensor out(x.shape);
    const std::size_t m = x.shape[0], n = x.shape[1];
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] = x.values[i * n + j] + bias.values[j];
    }
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat", "no operands");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.shape[0] != m) {
            throw ShapeError("concat", "row mismatch " + parts[0].shape_str() + " vs " + p.shape_str());
        }
        total += p.shape[1];
    }
    Tensor out({m, total});
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const std::size_t n = p.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
            std::copy_n(p.values.begin() + i * n, n, out.values.begin() + i * total + off);
        }
        off += n;
    }
    return out;
}

inline Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
    if (x.rank() != 2 || start + len > x.shape[1]) {
        throw ShapeError("slice", "columns [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                      ") out of range for " + x.shape_str());
    }
    const std::size_t m = x.shape[0], n = x.shape[1];
    Tensor out({m, len});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(x.values.begin() + i * n + start, len, out.values.begin() + i * len);
    }
    return out;
}

inline Tensor reshape(const Tensor& x, std::vector<std::size_t> s) {
    if (Tensor::numel_of(s) != x.numel()) {
        throw ShapeError("reshape", "cannot view " + x.shape_str() + " as " + Tensor::shape_str(s));
    }
    return Tensor(std::move(s), x.values);
}

inline double l2_norm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values) s += v * v;
    return std::sqrt(s);
}

inline double linf_distance(const Tensor& a, const Tensor& b) {
    require_same_shape("linf", a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

inline double l2_distance(const Tensor& a, const Tensor& b) {
    require_same_shape("l2", a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double mse(const Tensor& a, const Tensor& b) {
    require_same_shape("mse", a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

}  // namespace flowplan
