#pragma once

#include <string>
#include <vector>

#include "hvis/critic.hpp"
#include "hvis/motion.hpp"
#include "hvis/optim.hpp"
#include "hvis/ops.hpp"

namespace hvis::gen {

// One causal residual convolution block: dilated convs with relu after each,
// dropout, then the input added back through a 1x1 projection when the
// channel width changes. No activation after the add, so zeroed kernels make
// the block an exact (projected) identity.
struct TcnBlock {
    std::vector<ad::TensorPtr> kernels;  // [c_out x c_in x k] each
    std::vector<int> dilations;
    ad::TensorPtr skip;  // [c_out x c_in], null when c_in == c_out
    double dropout_rate = 0.1;
};

TcnBlock make_tcn_block(int c_in, int c_out, int kernel, std::vector<int> dilations, double dropout_rate,
                        ad::Rng& rng);
void register_tcn_block(ad::ParamSet& params, const std::string& prefix, const TcnBlock& block);

// x is [c_in x seg_len*B], B independent segments side by side.
ad::TensorPtr tcn_block_forward(const ad::TensorPtr& x, const TcnBlock& block, int seg_len, bool train,
                                ad::Rng& rng);

struct GeneratorConfig {
    int n_joints = 0;
    int feature_channels = 64;  // encoder output width
    int o_frames = 25;
    int f_frames = 25;
    int channels = 64;  // conv stack width
    int hidden = 256;   // latent and recurrent width
    double dropout_rate = 0.1;
    bool recurrent_only = false;  // ablation: skip the conv stack

    // A joint-identity one-hot rides along with the encoder features.
    int input_channels() const { return feature_channels + n_joints; }
};

// Per-joint future trajectory generator. One parameter set serves every
// joint; the appended one-hot tells the network which joint it is decoding.
// The conv stack summarizes the observed feature sequence into a latent that
// seeds the recurrent decoder; the decoder walks forward emitting per-step
// velocities added onto the previously emitted position.
struct Generator {
    GeneratorConfig cfg;
    std::vector<TcnBlock> blocks;
    ad::TensorPtr w_latent, b_latent;
    ad::GruParams gru;
    ad::TensorPtr w_out, b_out;

    static Generator create(const GeneratorConfig& cfg, ad::Rng& rng);

    void register_params(ad::ParamSet& params, const std::string& prefix) const;

    // Joint one-hot rows for a batch laid out like MotionEncoder::forward_batch.
    ad::TensorPtr joint_onehot(int b_windows) const;

    // features [feature_channels x B*N*O] -> latent [hidden x B*N].
    ad::TensorPtr latent_batch(const ad::TensorPtr& features, int b_windows, bool train, ad::Rng& rng) const;

    // latent [hidden x S] and last observed positions [3 x S] ->
    // F absolute-position tensors [3 x S].
    std::vector<ad::TensorPtr> decode_batch(const ad::TensorPtr& latent, const ad::TensorPtr& last_pos) const;
};

// Constant [3N x O] / [3N x F] matrices (rows j*3+c) from one window.
ad::TensorPtr window_obs_matrix(const data::WindowPair& w);
ad::TensorPtr window_future_matrix(const data::WindowPair& w);

// Last observed positions of every joint of every window, [3 x B*N],
// column s = w*N + i.
ad::TensorPtr last_positions(const std::vector<data::WindowPair>& windows);

// Regroups decoder output (F tensors [3 x B*N]) into one [3N x F] matrix
// for the given window.
ad::TensorPtr assemble_future(const std::vector<ad::TensorPtr>& steps, int n_joints, int window);

// -mean critic score of the generated futures plus lambda_j times the mean
// per-joint squared trajectory error (coordinates summed within each frame,
// averaged over frames, joints and windows).
ad::TensorPtr generator_loss(const Critic& critic, const ad::TensorPtr& fake_in,
                             const std::vector<ad::TensorPtr>& pred, const std::vector<ad::TensorPtr>& truth,
                             double lambda_j);

}  // namespace hvis::gen
