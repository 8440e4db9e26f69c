#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hvis/errors.hpp"

namespace hvis::ad {

using Rng = std::mt19937_64;
using Shape = std::vector<int>;

inline int shape_numel(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense tensor of 64-bit floats, row-major. Gradient storage is allocated
// lazily the first time a value flows back through the tensor.
class Tensor {
public:
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0, bool rg = false)
        : shape(std::move(s)), values(static_cast<std::size_t>(shape_numel(shape)), fill), requires_grad(rg) {
        for (int d : shape) {
            if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
        }
        if (rg) grad.assign(values.size(), 0.0);
    }

    int numel() const { return static_cast<int>(values.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return values.size() == 1; }

    double scalar() const {
        if (!is_scalar()) throw ContractError("expected a scalar tensor, got shape " + shape_str(shape));
        return values[0];
    }

    int rows() const {
        if (shape.empty()) throw DimensionError("rows() on rank-0 tensor");
        return shape[0];
    }
    int cols() const {
        if (rank() < 2) throw DimensionError("cols() on tensor of shape " + shape_str(shape));
        return shape[1];
    }

    double& at(int i) { return values[static_cast<std::size_t>(i)]; }
    double at(int i) const { return values[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * shape[1] + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * shape[1] + j]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(Shape s, double fill = 0.0, bool rg = false) {
    return std::make_shared<Tensor>(std::move(s), fill, rg);
}

inline TensorPtr make_tensor(Shape s, std::vector<double> vals, bool rg = false) {
    auto t = std::make_shared<Tensor>();
    if (shape_numel(s) != static_cast<int>(vals.size())) {
        throw DimensionError("value count " + std::to_string(vals.size()) + " does not match shape " + shape_str(s));
    }
    t->shape = std::move(s);
    t->values = std::move(vals);
    t->requires_grad = rg;
    if (rg) t->ensure_grad();
    return t;
}

inline TensorPtr make_scalar(double v) { return make_tensor({1}, {v}); }

// Ordered record of the operations of one forward pass. Each entry is the
// backward rule of one op; replaying entries newest-first propagates
// gradients because recording order equals forward execution order.
class Tape {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
    // Throws ContractError if loss is not scalar or nothing was recorded.
    void backward(const TensorPtr& loss, bool clear_after = true);

private:
    std::vector<std::function<void()>> nodes_;
};

// The tape ops record onto, per thread. Null means forward-only evaluation.
Tape* active_tape();

// Installs a tape as the active one for the current scope.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// Suspends recording for the current scope: ops run forward-only even if an
// outer tape is active.
class EvalScope {
public:
    EvalScope();
    ~EvalScope();
    EvalScope(const EvalScope&) = delete;
    EvalScope& operator=(const EvalScope&) = delete;

private:
    Tape* prev_;
};

}  // namespace hvis::ad
