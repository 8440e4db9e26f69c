#pragma once

#include <string>

#include "hvis/optim.hpp"
#include "hvis/ops.hpp"

namespace hvis::gen {

// Scalar scorer for (observed, future) pose pairs: three 256-unit fully
// connected layers with relu between them and a linear head. The output is
// unbounded; Lipschitz control comes from clipping the weights after every
// optimizer step.
struct Critic {
    int in_dim = 0;
    int hidden = 256;
    ad::TensorPtr w1, b1, w2, b2, w3, b3, w_head, b_head;

    static Critic create(int in_dim, int hidden, ad::Rng& rng);

    void register_params(ad::ParamSet& params, const std::string& prefix) const;

    // x [in_dim x B] -> scores [1 x B].
    ad::TensorPtr score_batch(const ad::TensorPtr& x) const;

    // Clamps every weight and bias to [-c, c].
    void clip(double c) const;
};

// Flattens one observed/future pair into a critic input column [3N*(O+F)].
ad::TensorPtr critic_input(const ad::TensorPtr& obs_mat, const ad::TensorPtr& fut_mat);

// Score of a single pair as a scalar tensor.
ad::TensorPtr critic_score(const Critic& critic, const ad::TensorPtr& obs_mat, const ad::TensorPtr& fut_mat);

// mean D(fake) - mean D(real): the quantity the critic minimizes, so the
// gap E D(real) - E D(fake) rises as training proceeds.
ad::TensorPtr critic_loss(const Critic& critic, const ad::TensorPtr& real_in, const ad::TensorPtr& fake_in);

}  // namespace hvis::gen
