#include "hvis/optim.hpp"

#include <cmath>

#include "hvis/ops.hpp"

namespace hvis::ad {

namespace {

TensorPtr uniform_init(Shape shape, double limit, Rng& rng) {
    auto t = make_tensor(std::move(shape));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (double& v : t->values) v = uni(rng);
    return t;
}

}  // namespace

TensorPtr xavier_mat(int out, int in, Rng& rng) {
    if (out <= 0 || in <= 0) throw ParameterError("xavier_mat: dimensions must be positive");
    return uniform_init({out, in}, std::sqrt(6.0 / (in + out)), rng);
}

TensorPtr xavier_conv(int out, int in, int k, Rng& rng) {
    if (out <= 0 || in <= 0 || k <= 0) throw ParameterError("xavier_conv: dimensions must be positive");
    return uniform_init({out, in, k}, std::sqrt(6.0 / (static_cast<double>(in) * k + static_cast<double>(out) * k)), rng);
}

TensorPtr zeros(Shape shape) { return make_tensor(std::move(shape)); }

void clip_weights(const ParamSet& params, double c) {
    for (const auto& [name, t] : params.items) clip_values(t, c);
}

Adam::Adam(ParamSet params) : Adam(std::move(params), Config()) {}

Adam::Adam(ParamSet params, Config cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw ParameterError("adam: learning rate must be positive");
    m_.reserve(params_.items.size());
    v_.reserve(params_.items.size());
    for (const auto& [name, t] : params_.items) {
        m_.emplace_back(t->values.size(), 0.0);
        v_.emplace_back(t->values.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.items.size(); ++p) {
        const auto& [name, t] = params_.items[p];
        t->ensure_grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < t->values.size(); ++i) {
            const double g = t->grad[i];
            if (!std::isfinite(g)) {
                throw TrainingError("adam: non-finite gradient for parameter '" + name + "'");
            }
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            t->values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace hvis::ad
