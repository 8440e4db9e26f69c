#include "hvis/encoder.hpp"

#include <cmath>
#include <random>

#include "hvis/errors.hpp"

namespace hvis::enc {

using ad::TensorPtr;

ad::TensorPtr apply_act(const ad::TensorPtr& x, Act act) {
    switch (act) {
        case Act::Identity: return x;
        case Act::Tanh: return ad::tanh(x);
        case Act::Relu: return ad::relu(x);
    }
    throw ContractError("apply_act: unknown activation tag");
}

ScaleMaps build_scale_maps(const data::SkeletonSpec& skeleton) {
    skeleton.validate();
    const int n = skeleton.joint_count();
    ScaleMaps maps;
    maps.joint_to_part = ad::make_tensor({kPartCount, n});
    for (int p = 0; p < kPartCount; ++p) {
        const auto members = skeleton.joints_in_part(p);
        for (int j : members) maps.joint_to_part->at(p, j) = 1.0 / static_cast<double>(members.size());
    }
    maps.part_to_body = ad::make_tensor({1, kPartCount}, 1.0 / kPartCount);
    return maps;
}

ad::TensorPtr build_static_adjacency(const data::SkeletonSpec& skeleton, int o_frames) {
    skeleton.validate();
    if (o_frames < 1) throw ParameterError("build_static_adjacency: window length must be positive");
    const int n = skeleton.joint_count();
    const int j_total = n * o_frames;
    auto a = ad::make_tensor({j_total, j_total});
    auto link = [&](int u, int v) {
        a->at(u, v) = 1.0;
        a->at(v, u) = 1.0;
    };
    for (int node = 0; node < j_total; ++node) a->at(node, node) = 1.0;
    for (int f = 0; f < o_frames; ++f) {
        for (int j = 0; j < n; ++j) {
            if (skeleton.parents[j] >= 0) link(f * n + j, f * n + skeleton.parents[j]);
            if (f + 1 < o_frames) link(f * n + j, (f + 1) * n + j);
        }
    }
    return a;
}

ad::TensorPtr normalize_adjacency(const ad::TensorPtr& a) {
    if (a->rank() != 2 || a->rows() != a->cols())
        throw DimensionError("normalize_adjacency: expected a square matrix, got " + ad::shape_str(a->shape));
    const int n = a->rows();
    std::vector<double> inv_sqrt(n);
    for (int i = 0; i < n; ++i) {
        double deg = 0.0;
        for (int j = 0; j < n; ++j) deg += a->at(i, j);
        if (deg <= 0.0)
            throw DataError("normalize_adjacency: node " + std::to_string(i) + " has zero degree");
        inv_sqrt[i] = 1.0 / std::sqrt(deg);
    }
    auto out = ad::make_tensor(a->shape);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = inv_sqrt[i] * a->at(i, j) * inv_sqrt[j];
    return out;
}

namespace {

// Adjacency whose per-frame block is `spatial` [K x K] (self-loops included)
// with same-node edges between adjacent frames, as one [K*O x K*O] matrix.
TensorPtr temporal_chain(int k, int o_frames) {
    const int total = k * o_frames;
    auto a = ad::make_tensor({total, total});
    for (int node = 0; node < total; ++node) a->at(node, node) = 1.0;
    for (int f = 0; f + 1 < o_frames; ++f)
        for (int j = 0; j < k; ++j) {
            a->at(f * k + j, (f + 1) * k + j) = 1.0;
            a->at((f + 1) * k + j, f * k + j) = 1.0;
        }
    return a;
}

TensorPtr replicate_spatial(const TensorPtr& spatial, int o_frames) {
    const int k = spatial->rows();
    auto a = ad::make_tensor({k * o_frames, k * o_frames});
    for (int f = 0; f < o_frames; ++f)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) a->at(f * k + i, f * k + j) = spatial->at(i, j);
    return a;
}

// Value-level product of two constant matrices, kept off the tape.
TensorPtr const_matmul(const TensorPtr& a, const TensorPtr& b) {
    ad::EvalScope no_tape;
    return ad::matmul(a, b);
}

}  // namespace

AdjacencyPack build_adjacency_pack(const data::SkeletonSpec& skeleton, int o_frames, ad::Rng& rng) {
    AdjacencyPack pack;
    pack.n_joints = skeleton.joint_count();
    pack.o_frames = o_frames;
    pack.a_static = build_static_adjacency(skeleton, o_frames);
    pack.a_static_norm = normalize_adjacency(pack.a_static);

    const int j_total = pack.nodes();
    pack.a_dynamic = ad::make_tensor({j_total, j_total});
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    for (int i = 0; i < j_total; ++i)
        for (int j = 0; j < j_total; ++j) pack.a_dynamic->at(i, j) = (i == j ? 1.0 : 0.0) + noise(rng);

    const int n = pack.n_joints;
    pack.scale_nodes = {n * o_frames, kPartCount * o_frames, o_frames};

    // Per-frame spatial blocks: skeleton edges, a star of the limb parts
    // around the trunk part, and the single whole-body node.
    std::array<TensorPtr, 3> spatial;
    spatial[0] = ad::make_tensor({n, n});
    for (int j = 0; j < n; ++j) {
        spatial[0]->at(j, j) = 1.0;
        if (skeleton.parents[j] >= 0) {
            spatial[0]->at(j, skeleton.parents[j]) = 1.0;
            spatial[0]->at(skeleton.parents[j], j) = 1.0;
        }
    }
    spatial[1] = ad::make_tensor({kPartCount, kPartCount});
    for (int p = 0; p < kPartCount; ++p) {
        spatial[1]->at(p, p) = 1.0;
        if (p > 0) {
            spatial[1]->at(0, p) = 1.0;
            spatial[1]->at(p, 0) = 1.0;
        }
    }
    spatial[2] = ad::make_tensor({1, 1}, 1.0);

    const auto maps = build_scale_maps(skeleton);
    const std::array<int, 3> per_frame = {n, kPartCount, 1};
    for (int m = 0; m < 3; ++m) {
        const int k = per_frame[m];
        auto a_s = replicate_spatial(spatial[m], o_frames);
        auto a_t = temporal_chain(k, o_frames);
        pack.scale_propagator[m] = const_matmul(normalize_adjacency(a_s), normalize_adjacency(a_t));

        auto pool = ad::make_tensor({k * o_frames, j_total});
        auto unpool = ad::make_tensor({j_total, k * o_frames});
        for (int f = 0; f < o_frames; ++f)
            for (int j = 0; j < n; ++j) {
                const int node = f * n + j;
                if (m == 0) {
                    pool->at(node, node) = 1.0;
                    unpool->at(node, node) = 1.0;
                } else if (m == 1) {
                    const int p = skeleton.part_of[j];
                    pool->at(f * kPartCount + p, node) = maps.joint_to_part->at(p, j);
                    unpool->at(node, f * kPartCount + p) = 1.0;
                } else {
                    pool->at(f, node) = 1.0 / n;
                    unpool->at(node, f) = 1.0;
                }
            }
        pack.pool[m] = pool;
        pack.unpool[m] = unpool;
    }
    return pack;
}

ad::TensorPtr pool_to_scale(const ad::TensorPtr& x, const AdjacencyPack& pack, int m) {
    if (m < 0 || m > 2) throw ParameterError("pool_to_scale: scale must be 0, 1 or 2, got " + std::to_string(m));
    if (m == 0) return x;
    return ad::matmul(pack.pool[m], x);
}

ad::TensorPtr factored_gcn_layer(const ad::TensorPtr& x, const AdjacencyPack& pack, const ad::TensorPtr& w,
                                 Act act) {
    auto xw = ad::matmul(x, w);
    auto mixed = ad::matmul(pack.a_static_norm, ad::matmul(pack.a_dynamic, xw));
    return apply_act(mixed, act);
}

ad::TensorPtr multiscale_gcn_layer(const ad::TensorPtr& x, const AdjacencyPack& pack,
                                   const std::array<ad::TensorPtr, 3>& w, Act act) {
    TensorPtr acc;
    for (int m = 0; m < 3; ++m) {
        auto propagated = ad::matmul(pack.scale_propagator[m], pool_to_scale(x, pack, m));
        auto term = ad::matmul(propagated, w[m]);
        if (m > 0) term = ad::matmul(pack.unpool[m], term);
        acc = acc ? ad::add(acc, term) : term;
    }
    return apply_act(acc, act);
}

ad::TensorPtr plain_gcn_layer(const ad::TensorPtr& x, const AdjacencyPack& pack, const ad::TensorPtr& w, Act act) {
    return apply_act(ad::matmul(pack.a_static_norm, ad::matmul(x, w)), act);
}

MotionEncoder MotionEncoder::create(const data::SkeletonSpec& skeleton, int o_frames, int channels,
                                    EncoderKind kind, ad::Rng& rng) {
    if (channels < 1) throw ParameterError("MotionEncoder: channel width must be positive");
    MotionEncoder e;
    e.skeleton = skeleton;
    e.o_frames = o_frames;
    e.channels = channels;
    e.kind = kind;
    e.pack = build_adjacency_pack(skeleton, o_frames, rng);
    e.w1 = ad::xavier_mat(3, channels, rng);
    if (kind == EncoderKind::Multiscale) {
        for (auto& w : e.w2) w = ad::xavier_mat(channels, channels, rng);
    } else {
        e.w2_plain = ad::xavier_mat(channels, channels, rng);
    }
    e.w3 = ad::xavier_mat(channels, channels, rng);
    return e;
}

void MotionEncoder::register_params(ad::ParamSet& params, const std::string& prefix) const {
    params.add(prefix + "w1", w1);
    if (kind == EncoderKind::Multiscale) {
        params.add(prefix + "a_dynamic", pack.a_dynamic);
        for (int m = 0; m < 3; ++m) params.add(prefix + "w2." + std::to_string(m), w2[m]);
    } else {
        params.add(prefix + "w2", w2_plain);
    }
    params.add(prefix + "w3", w3);
}

ad::TensorPtr MotionEncoder::window_nodes(const data::WindowPair& w) const {
    if (w.n_joints != pack.n_joints || w.o_frames != o_frames)
        throw DimensionError("window_nodes: window is " + std::to_string(w.o_frames) + "x" +
                             std::to_string(w.n_joints) + " joints, encoder expects " +
                             std::to_string(o_frames) + "x" + std::to_string(pack.n_joints));
    auto x = ad::make_tensor({pack.nodes(), 3});
    for (int f = 0; f < o_frames; ++f)
        for (int j = 0; j < pack.n_joints; ++j)
            for (int c = 0; c < 3; ++c) x->at(f * pack.n_joints + j, c) = w.obs(f, j, c);
    return x;
}

ad::TensorPtr MotionEncoder::encode_nodes(const ad::TensorPtr& x0) const {
    if (kind == EncoderKind::PlainGcn) {
        auto x1 = plain_gcn_layer(x0, pack, w1, Act::Tanh);
        auto x2 = plain_gcn_layer(x1, pack, w2_plain, Act::Tanh);
        return plain_gcn_layer(x2, pack, w3, Act::Tanh);
    }
    auto x1 = factored_gcn_layer(x0, pack, w1, Act::Tanh);
    auto x2 = multiscale_gcn_layer(x1, pack, w2, Act::Tanh);
    return factored_gcn_layer(x2, pack, w3, Act::Tanh);
}

ad::TensorPtr MotionEncoder::joint_major(const ad::TensorPtr& nodes) const {
    const int n = pack.n_joints;
    std::vector<int> idx(static_cast<std::size_t>(n) * o_frames);
    for (int j = 0; j < n; ++j)
        for (int t = 0; t < o_frames; ++t) idx[static_cast<std::size_t>(j) * o_frames + t] = t * n + j;
    return ad::gather_cols(ad::transpose(nodes), idx);
}

std::vector<ad::TensorPtr> MotionEncoder::encode_window(const data::WindowPair& w) const {
    auto features = joint_major(encode_nodes(window_nodes(w)));
    std::vector<ad::TensorPtr> per_joint;
    per_joint.reserve(pack.n_joints);
    for (int j = 0; j < pack.n_joints; ++j) per_joint.push_back(ad::slice_cols(features, j * o_frames, o_frames));
    return per_joint;
}

ad::TensorPtr MotionEncoder::forward_batch(const std::vector<data::WindowPair>& windows) const {
    if (windows.empty()) throw ContractError("forward_batch: empty window batch");
    std::vector<TensorPtr> blocks;
    blocks.reserve(windows.size());
    for (const auto& w : windows) blocks.push_back(joint_major(encode_nodes(window_nodes(w))));
    return blocks.size() == 1 ? blocks[0] : ad::concat_cols(blocks);
}

}  // namespace hvis::enc
