#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hvis/tensor.hpp"

namespace hvis::ad {

// Named, ordered collection of trainable tensors. Order is registration
// order and is the canonical order for serialization.
struct ParamSet {
    std::vector<std::pair<std::string, TensorPtr>> items;

    TensorPtr add(std::string name, TensorPtr t) {
        t->requires_grad = true;
        t->ensure_grad();
        items.emplace_back(std::move(name), t);
        return items.back().second;
    }

    void append(const ParamSet& other, const std::string& prefix) {
        for (const auto& [name, t] : other.items) items.emplace_back(prefix + name, t);
    }

    TensorPtr find(const std::string& name) const {
        for (const auto& [n, t] : items)
            if (n == name) return t;
        return nullptr;
    }

    void zero_grad() const {
        for (const auto& [n, t] : items) t->zero_grad();
    }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& [name, t] : items) n += t->values.size();
        return n;
    }
};

// Xavier-uniform initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
TensorPtr xavier_mat(int out, int in, Rng& rng);
// Conv kernels [out x in x k] use fan_in = in*k, fan_out = out*k.
TensorPtr xavier_conv(int out, int in, int k, Rng& rng);
TensorPtr zeros(Shape shape);

// Clamps every parameter in the set to [-c, c].
void clip_weights(const ParamSet& params, double c);

// Adam with bias-corrected first and second moments.
class Adam {
public:
    struct Config {
        double lr = 0.001;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    explicit Adam(ParamSet params);
    Adam(ParamSet params, Config cfg);

    // Applies one update from the current gradients. Throws TrainingError
    // naming the parameter if any gradient is non-finite.
    void step();
    void zero_grad() const { params_.zero_grad(); }
    long step_count() const { return t_; }
    const Config& config() const { return cfg_; }

private:
    ParamSet params_;
    Config cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace hvis::ad
