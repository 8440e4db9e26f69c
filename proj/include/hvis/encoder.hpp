#pragma once

#include <array>
#include <string>
#include <vector>

#include "hvis/motion.hpp"
#include "hvis/optim.hpp"
#include "hvis/ops.hpp"
#include "hvis/skeleton.hpp"

namespace hvis::enc {

using data::kPartCount;

// Node features run node-major throughout this module: a window of O frames
// over N joints flattens to J = N*O graph nodes, node(f, n) = f*N + n, and a
// feature tensor is [J x C] with one row per node.

enum class Act { Identity, Tanh, Relu };

ad::TensorPtr apply_act(const ad::TensorPtr& x, Act act);

// Per-frame membership averages. Rows of joint_to_part average the joints of
// one part; parts with no joints get a zero row (only reachable with toy
// skeletons, the bundled skeletons populate all five).
struct ScaleMaps {
    ad::TensorPtr joint_to_part;  // [5 x N]
    ad::TensorPtr part_to_body;   // [1 x 5]
};

ScaleMaps build_scale_maps(const data::SkeletonSpec& skeleton);

// Spatio-temporal adjacency over J = N*O nodes: skeleton edges within each
// frame, same-joint edges between adjacent frames, unit diagonal.
ad::TensorPtr build_static_adjacency(const data::SkeletonSpec& skeleton, int o_frames);

// Symmetric normalization D^{-1/2} A D^{-1/2}. Rejects zero-degree nodes.
ad::TensorPtr normalize_adjacency(const ad::TensorPtr& a);

// Fixed graph structure shared by every layer of one encoder, plus the
// learnable dynamic adjacency. Scale 0 is the joint graph, scale 1 groups
// joints into the five parts (star around the trunk), scale 2 is one node
// per frame; all three repeat per frame with adjacent-frame temporal chains.
struct AdjacencyPack {
    int n_joints = 0;
    int o_frames = 0;
    ad::TensorPtr a_static;       // [J x J]
    ad::TensorPtr a_static_norm;  // [J x J], constant
    ad::TensorPtr a_dynamic;      // [J x J], learnable, init I + U(-0.01, 0.01)
    std::array<int, 3> scale_nodes{};
    std::array<ad::TensorPtr, 3> scale_propagator;  // [Jm x Jm] = norm(As)*norm(At)
    std::array<ad::TensorPtr, 3> pool;              // [Jm x J] averaging
    std::array<ad::TensorPtr, 3> unpool;            // [J x Jm] membership

    int nodes() const { return n_joints * o_frames; }
};

AdjacencyPack build_adjacency_pack(const data::SkeletonSpec& skeleton, int o_frames, ad::Rng& rng);

// act(norm(a_static) * a_dynamic * x * w): the fixed factor keeps the
// operator bounded, the learnable factor captures coordination between any
// two nodes. x is [J x C], w is [C x C'].
ad::TensorPtr factored_gcn_layer(const ad::TensorPtr& x, const AdjacencyPack& pack, const ad::TensorPtr& w,
                                 Act act);

// act(sum over scales of unpool_m * propagator_m * pool_m * x * w[m]).
ad::TensorPtr multiscale_gcn_layer(const ad::TensorPtr& x, const AdjacencyPack& pack,
                                   const std::array<ad::TensorPtr, 3>& w, Act act);

// act(norm(a_static) * x * w), the ablation layer without the dynamic factor
// or the scale pyramid.
ad::TensorPtr plain_gcn_layer(const ad::TensorPtr& x, const AdjacencyPack& pack, const ad::TensorPtr& w, Act act);

// Averages node features into scale-m nodes. m=0 is the identity.
ad::TensorPtr pool_to_scale(const ad::TensorPtr& x, const AdjacencyPack& pack, int m);

enum class EncoderKind { Multiscale, PlainGcn };

// Three stacked graph layers (factored, multiscale, factored), channels
// 3 -> C -> C -> C, shared tanh. The PlainGcn kind swaps every layer for
// plain_gcn_layer under the same widths.
struct MotionEncoder {
    data::SkeletonSpec skeleton;
    int o_frames = 0;
    int channels = 64;
    EncoderKind kind = EncoderKind::Multiscale;
    AdjacencyPack pack;
    ad::TensorPtr w1;                  // [3 x C]
    std::array<ad::TensorPtr, 3> w2;   // [C x C], multiscale middle layer
    ad::TensorPtr w2_plain;            // [C x C], PlainGcn middle layer
    ad::TensorPtr w3;                  // [C x C]

    static MotionEncoder create(const data::SkeletonSpec& skeleton, int o_frames, int channels, EncoderKind kind,
                                ad::Rng& rng);

    void register_params(ad::ParamSet& params, const std::string& prefix) const;

    // Flattens a window's observed frames into node rows [J x 3]; constant.
    ad::TensorPtr window_nodes(const data::WindowPair& w) const;

    // Full layer stack, [J x 3] -> [J x C].
    ad::TensorPtr encode_nodes(const ad::TensorPtr& x0) const;

    // Reorders node features [J x C] into [C x N*O] with the O columns of
    // joint 0 first, then joint 1, and so on.
    ad::TensorPtr joint_major(const ad::TensorPtr& nodes) const;

    // Per-joint feature sequences, N tensors of [C x O].
    std::vector<ad::TensorPtr> encode_window(const data::WindowPair& w) const;

    // Batched encoding: [C x B*N*O], window-major then joint-major, so the
    // columns of segment s = w*N + i hold joint i of window w.
    ad::TensorPtr forward_batch(const std::vector<data::WindowPair>& windows) const;
};

}  // namespace hvis::enc
