#include "hvis/critic.hpp"

#include "hvis/errors.hpp"

namespace hvis::gen {

using ad::TensorPtr;

Critic Critic::create(int in_dim, int hidden, ad::Rng& rng) {
    if (in_dim < 1 || hidden < 1) throw ParameterError("Critic: input and hidden sizes must be positive");
    Critic c;
    c.in_dim = in_dim;
    c.hidden = hidden;
    c.w1 = ad::xavier_mat(hidden, in_dim, rng);
    c.b1 = ad::zeros({hidden});
    c.w2 = ad::xavier_mat(hidden, hidden, rng);
    c.b2 = ad::zeros({hidden});
    c.w3 = ad::xavier_mat(hidden, hidden, rng);
    c.b3 = ad::zeros({hidden});
    c.w_head = ad::xavier_mat(1, hidden, rng);
    c.b_head = ad::zeros({1});
    return c;
}

void Critic::register_params(ad::ParamSet& params, const std::string& prefix) const {
    params.add(prefix + "w1", w1);
    params.add(prefix + "b1", b1);
    params.add(prefix + "w2", w2);
    params.add(prefix + "b2", b2);
    params.add(prefix + "w3", w3);
    params.add(prefix + "b3", b3);
    params.add(prefix + "w_head", w_head);
    params.add(prefix + "b_head", b_head);
}

ad::TensorPtr Critic::score_batch(const ad::TensorPtr& x) const {
    if (x->rank() != 2 || x->rows() != in_dim)
        throw DimensionError("critic: expected input [" + std::to_string(in_dim) + " x B], got " +
                             ad::shape_str(x->shape));
    auto h1 = ad::relu(ad::add_bias_cols(ad::matmul(w1, x), b1));
    auto h2 = ad::relu(ad::add_bias_cols(ad::matmul(w2, h1), b2));
    auto h3 = ad::relu(ad::add_bias_cols(ad::matmul(w3, h2), b3));
    return ad::add_bias_cols(ad::matmul(w_head, h3), b_head);
}

void Critic::clip(double c) const {
    for (const auto& t : {w1, b1, w2, b2, w3, b3, w_head, b_head}) ad::clip_values(t, c);
}

ad::TensorPtr critic_input(const ad::TensorPtr& obs_mat, const ad::TensorPtr& fut_mat) {
    if (obs_mat->rank() != 2 || fut_mat->rank() != 2 || obs_mat->rows() != fut_mat->rows())
        throw DimensionError("critic_input: observed " + ad::shape_str(obs_mat->shape) + " and future " +
                             ad::shape_str(fut_mat->shape) + " must share their row count");
    auto obs_flat = ad::reshape(obs_mat, {obs_mat->numel()});
    auto fut_flat = ad::reshape(fut_mat, {fut_mat->numel()});
    return ad::concat_vec({obs_flat, fut_flat});
}

ad::TensorPtr critic_score(const Critic& critic, const ad::TensorPtr& obs_mat, const ad::TensorPtr& fut_mat) {
    auto col = critic_input(obs_mat, fut_mat);
    auto scores = critic.score_batch(ad::reshape(col, {col->numel(), 1}));
    return ad::reshape(scores, {1});
}

ad::TensorPtr critic_loss(const Critic& critic, const ad::TensorPtr& real_in, const ad::TensorPtr& fake_in) {
    return ad::sub(ad::mean(critic.score_batch(fake_in)), ad::mean(critic.score_batch(real_in)));
}

}  // namespace hvis::gen
