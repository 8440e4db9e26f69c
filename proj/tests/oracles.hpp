#pragma once

// Test-side reference implementations and the finite-difference gradient
// checker. Everything here must stay independent of the library's own
// forward/backward code paths.

#include <cmath>
#include <functional>
#include <vector>

#include "hvis/ops.hpp"
#include "hvis/tensor.hpp"

namespace oracle {

using hvis::ad::Tensor;
using hvis::ad::TensorPtr;

// Central finite differences at h = 1e-5 against the recorded gradient.
// Checks every coordinate of every leaf unless max_coords_per_leaf caps it
// (coordinates are then sampled deterministically). Returns the worst
// relative error seen.
struct FdReport {
    double worst_rel = 0.0;
    int checked = 0;
};

// min_mag is the measurement noise floor: when both the finite-difference
// estimate and the recorded gradient sit below it, the coordinate carries
// no checkable signal (the difference is cancellation noise, about
// eps*|f|/2h) and is skipped. A recorded zero against a large estimate
// still counts as a failure.
inline FdReport check_gradients(const std::function<TensorPtr()>& forward,
                                const std::vector<TensorPtr>& leaves,
                                int max_coords_per_leaf = 0,
                                unsigned sample_seed = 1,
                                double h = 1e-5,
                                double min_mag = 1e-7) {
    hvis::ad::Tape tape;
    {
        hvis::ad::TapeScope scope(tape);
        auto loss = forward();
        tape.backward(loss);
    }
    std::vector<std::vector<double>> recorded;
    recorded.reserve(leaves.size());
    for (const auto& leaf : leaves) {
        leaf->ensure_grad();
        recorded.push_back(leaf->grad);
        leaf->zero_grad();
    }

    FdReport report;
    std::mt19937_64 pick(sample_seed);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        std::vector<int> coords;
        const int n = leaf->numel();
        if (max_coords_per_leaf <= 0 || n <= max_coords_per_leaf) {
            for (int i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int c = 0; c < max_coords_per_leaf; ++c) coords.push_back(static_cast<int>(pick() % n));
        }
        for (int i : coords) {
            const double saved = leaf->values[i];
            leaf->values[i] = saved + h;
            const double up = forward()->scalar();
            leaf->values[i] = saved - h;
            const double down = forward()->scalar();
            leaf->values[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double ad = recorded[li][i];
            const double denom = std::max({std::fabs(fd), std::fabs(ad), min_mag});
            const double rel = std::fabs(fd - ad) / denom;
            if (std::fabs(fd) < min_mag && std::fabs(ad) < min_mag) continue;
            if (rel > report.worst_rel) report.worst_rel = rel;
            ++report.checked;
        }
    }
    return report;
}

// Reference causal dilated convolution, written from the tap definition.
inline std::vector<double> conv1d_reference(const std::vector<double>& x, int cin, int t_len,
                                            const std::vector<double>& kernel, int cout, int k, int dilation) {
    std::vector<double> out(static_cast<std::size_t>(cout) * t_len, 0.0);
    for (int o = 0; o < cout; ++o)
        for (int t = 0; t < t_len; ++t) {
            double acc = 0.0;
            for (int c = 0; c < cin; ++c)
                for (int j = 0; j < k; ++j) {
                    const int src = t - (k - 1 - j) * dilation;
                    if (src < 0) continue;
                    acc += kernel[(static_cast<std::size_t>(o) * cin + c) * k + j] * x[static_cast<std::size_t>(c) * t_len + src];
                }
            out[static_cast<std::size_t>(o) * t_len + t] = acc;
        }
    return out;
}

// Reference GRU step computed gate by gate on plain scalars.
inline std::vector<double> gru_reference(const std::vector<double>& x, const std::vector<double>& h,
                                         const hvis::ad::GruParams& p) {
    const int in = static_cast<int>(x.size());
    const int hid = static_cast<int>(h.size());
    auto mv = [](const TensorPtr& w, const std::vector<double>& v, int rows, int cols) {
        std::vector<double> out(rows, 0.0);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) out[i] += w->values[static_cast<std::size_t>(i) * cols + j] * v[j];
        return out;
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    auto wzx = mv(p.wz, x, hid, in), uzh = mv(p.uz, h, hid, hid);
    auto wrx = mv(p.wr, x, hid, in), urh = mv(p.ur, h, hid, hid);
    std::vector<double> z(hid), r(hid);
    for (int i = 0; i < hid; ++i) {
        z[i] = sig(wzx[i] + uzh[i] + p.bz->values[i]);
        r[i] = sig(wrx[i] + urh[i] + p.br->values[i]);
    }
    std::vector<double> rh(hid);
    for (int i = 0; i < hid; ++i) rh[i] = r[i] * h[i];
    auto wcx = mv(p.wc, x, hid, in), ucrh = mv(p.uc, rh, hid, hid);
    std::vector<double> out(hid);
    for (int i = 0; i < hid; ++i) {
        const double cand = std::tanh(wcx[i] + ucrh[i] + p.bc->values[i]);
        out[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
    }
    return out;
}

inline TensorPtr random_tensor(hvis::ad::Shape shape, hvis::ad::Rng& rng, double lo = -1.0, double hi = 1.0) {
    auto t = hvis::ad::make_tensor(std::move(shape));
    std::uniform_real_distribution<double> uni(lo, hi);
    for (double& v : t->values) v = uni(rng);
    return t;
}

inline TensorPtr leaf(const TensorPtr& t) {
    t->requires_grad = true;
    t->ensure_grad();
    return t;
}

}  // namespace oracle
