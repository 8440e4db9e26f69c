#include "hvis/generator.hpp"

#include "hvis/errors.hpp"

namespace hvis::gen {

using ad::TensorPtr;

TcnBlock make_tcn_block(int c_in, int c_out, int kernel, std::vector<int> dilations, double dropout_rate,
                        ad::Rng& rng) {
    if (c_in < 1 || c_out < 1 || kernel < 1) throw ParameterError("tcn block: sizes must be positive");
    if (dilations.empty()) throw ParameterError("tcn block: at least one convolution layer is required");
    TcnBlock b;
    b.dropout_rate = dropout_rate;
    b.dilations = std::move(dilations);
    int in = c_in;
    for (std::size_t i = 0; i < b.dilations.size(); ++i) {
        b.kernels.push_back(ad::xavier_conv(c_out, in, kernel, rng));
        in = c_out;
    }
    if (c_in != c_out) b.skip = ad::xavier_mat(c_out, c_in, rng);
    return b;
}

void register_tcn_block(ad::ParamSet& params, const std::string& prefix, const TcnBlock& block) {
    for (std::size_t i = 0; i < block.kernels.size(); ++i)
        params.add(prefix + "conv" + std::to_string(i), block.kernels[i]);
    if (block.skip) params.add(prefix + "skip", block.skip);
}

ad::TensorPtr tcn_block_forward(const ad::TensorPtr& x, const TcnBlock& block, int seg_len, bool train,
                                ad::Rng& rng) {
    auto h = x;
    for (std::size_t i = 0; i < block.kernels.size(); ++i)
        h = ad::relu(ad::conv1d_causal_seg(h, block.kernels[i], block.dilations[i], seg_len));
    h = ad::dropout(h, block.dropout_rate, train, rng);
    auto shortcut = block.skip ? ad::matmul(block.skip, x) : x;
    return ad::add(h, shortcut);
}

Generator Generator::create(const GeneratorConfig& cfg, ad::Rng& rng) {
    if (cfg.n_joints < 1 || cfg.o_frames < 1 || cfg.f_frames < 1 || cfg.channels < 1 || cfg.hidden < 1)
        throw ParameterError("Generator: joint count, window lengths and widths must be positive");
    Generator g;
    g.cfg = cfg;
    if (!cfg.recurrent_only) {
        g.blocks.push_back(make_tcn_block(cfg.input_channels(), cfg.channels, 3, {1, 2, 4}, cfg.dropout_rate, rng));
        g.blocks.push_back(make_tcn_block(cfg.channels, cfg.channels, 3, {1, 2, 4}, cfg.dropout_rate, rng));
        g.blocks.push_back(make_tcn_block(cfg.channels, cfg.channels, 3, {1, 2, 4}, cfg.dropout_rate, rng));
        g.w_latent = ad::xavier_mat(cfg.hidden, cfg.channels, rng);
    } else {
        g.w_latent = ad::xavier_mat(cfg.hidden, cfg.input_channels(), rng);
    }
    g.b_latent = ad::zeros({cfg.hidden});
    const int h = cfg.hidden;
    g.gru.wz = ad::xavier_mat(h, 3, rng);
    g.gru.uz = ad::xavier_mat(h, h, rng);
    g.gru.bz = ad::zeros({h});
    g.gru.wr = ad::xavier_mat(h, 3, rng);
    g.gru.ur = ad::xavier_mat(h, h, rng);
    g.gru.br = ad::zeros({h});
    g.gru.wc = ad::xavier_mat(h, 3, rng);
    g.gru.uc = ad::xavier_mat(h, h, rng);
    g.gru.bc = ad::zeros({h});
    g.w_out = ad::xavier_mat(3, h, rng);
    g.b_out = ad::zeros({3});
    return g;
}

void Generator::register_params(ad::ParamSet& params, const std::string& prefix) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
        register_tcn_block(params, prefix + "block" + std::to_string(b) + ".", blocks[b]);
    params.add(prefix + "w_latent", w_latent);
    params.add(prefix + "b_latent", b_latent);
    params.add(prefix + "gru.wz", gru.wz);
    params.add(prefix + "gru.uz", gru.uz);
    params.add(prefix + "gru.bz", gru.bz);
    params.add(prefix + "gru.wr", gru.wr);
    params.add(prefix + "gru.ur", gru.ur);
    params.add(prefix + "gru.br", gru.br);
    params.add(prefix + "gru.wc", gru.wc);
    params.add(prefix + "gru.uc", gru.uc);
    params.add(prefix + "gru.bc", gru.bc);
    params.add(prefix + "w_out", w_out);
    params.add(prefix + "b_out", b_out);
}

ad::TensorPtr Generator::joint_onehot(int b_windows) const {
    const int n = cfg.n_joints, o = cfg.o_frames;
    auto onehot = ad::make_tensor({n, b_windows * n * o});
    for (int s = 0; s < b_windows * n; ++s) {
        const int j = s % n;
        for (int t = 0; t < o; ++t) onehot->at(j, s * o + t) = 1.0;
    }
    return onehot;
}

ad::TensorPtr Generator::latent_batch(const ad::TensorPtr& features, int b_windows, bool train,
                                      ad::Rng& rng) const {
    const int n = cfg.n_joints, o = cfg.o_frames;
    if (features->rank() != 2 || features->rows() != cfg.feature_channels ||
        features->cols() != b_windows * n * o)
        throw DimensionError("latent_batch: expected features [" + std::to_string(cfg.feature_channels) + " x " +
                             std::to_string(b_windows * n * o) + "], got " + ad::shape_str(features->shape));
    auto x = ad::concat_rows(features, joint_onehot(b_windows));
    std::vector<int> last_idx(static_cast<std::size_t>(b_windows) * n);
    for (std::size_t s = 0; s < last_idx.size(); ++s) last_idx[s] = static_cast<int>(s) * o + (o - 1);
    TensorPtr last;
    if (cfg.recurrent_only) {
        last = ad::gather_cols(x, last_idx);
    } else {
        auto h = x;
        for (const auto& block : blocks) h = tcn_block_forward(h, block, o, train, rng);
        last = ad::gather_cols(h, last_idx);
    }
    return ad::add_bias_cols(ad::matmul(w_latent, last), b_latent);
}

std::vector<ad::TensorPtr> Generator::decode_batch(const ad::TensorPtr& latent,
                                                   const ad::TensorPtr& last_pos) const {
    if (latent->rank() != 2 || latent->rows() != cfg.hidden)
        throw DimensionError("decode_batch: latent must be [" + std::to_string(cfg.hidden) + " x S], got " +
                             ad::shape_str(latent->shape));
    if (last_pos->rank() != 2 || last_pos->rows() != 3 || last_pos->cols() != latent->cols())
        throw DimensionError("decode_batch: last positions must be [3 x " + std::to_string(latent->cols()) +
                             "], got " + ad::shape_str(last_pos->shape));
    std::vector<TensorPtr> out;
    out.reserve(cfg.f_frames);
    auto h = latent;
    auto p = last_pos;
    for (int f = 0; f < cfg.f_frames; ++f) {
        h = ad::gru_cell(p, h, gru);
        auto v = ad::add_bias_cols(ad::matmul(w_out, h), b_out);
        p = ad::add(p, v);
        out.push_back(p);
    }
    return out;
}

ad::TensorPtr window_obs_matrix(const data::WindowPair& w) {
    auto m = ad::make_tensor({3 * w.n_joints, w.o_frames});
    for (int j = 0; j < w.n_joints; ++j)
        for (int c = 0; c < 3; ++c)
            for (int t = 0; t < w.o_frames; ++t) m->at(j * 3 + c, t) = w.obs(t, j, c);
    return m;
}

ad::TensorPtr window_future_matrix(const data::WindowPair& w) {
    auto m = ad::make_tensor({3 * w.n_joints, w.f_frames});
    for (int j = 0; j < w.n_joints; ++j)
        for (int c = 0; c < 3; ++c)
            for (int t = 0; t < w.f_frames; ++t) m->at(j * 3 + c, t) = w.fut(t, j, c);
    return m;
}

ad::TensorPtr last_positions(const std::vector<data::WindowPair>& windows) {
    if (windows.empty()) throw ContractError("last_positions: empty window batch");
    const int n = windows[0].n_joints;
    auto m = ad::make_tensor({3, static_cast<int>(windows.size()) * n});
    for (std::size_t w = 0; w < windows.size(); ++w)
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < 3; ++c)
                m->at(c, static_cast<int>(w) * n + j) = windows[w].obs(windows[w].o_frames - 1, j, c);
    return m;
}

ad::TensorPtr assemble_future(const std::vector<ad::TensorPtr>& steps, int n_joints, int window) {
    if (steps.empty()) throw ContractError("assemble_future: no decoder steps");
    std::vector<TensorPtr> cols;
    cols.reserve(steps.size());
    for (const auto& step : steps) {
        auto block = ad::slice_cols(step, window * n_joints, n_joints);        // [3 x N]
        cols.push_back(ad::reshape(ad::transpose(block), {3 * n_joints}));     // joint-major rows
    }
    return ad::stack_cols(cols);
}

ad::TensorPtr generator_loss(const Critic& critic, const ad::TensorPtr& fake_in,
                             const std::vector<ad::TensorPtr>& pred, const std::vector<ad::TensorPtr>& truth,
                             double lambda_j) {
    if (pred.size() != truth.size() || pred.empty())
        throw ContractError("generator_loss: prediction and truth step counts disagree");
    const int s = pred[0]->cols();
    const int f = static_cast<int>(pred.size());
    TensorPtr sq_sum;
    for (int i = 0; i < f; ++i) {
        auto d = ad::sub(pred[i], truth[i]);
        auto sq = ad::sum(ad::mul(d, d));
        sq_sum = sq_sum ? ad::add(sq_sum, sq) : sq;
    }
    auto joint_term = ad::scale(sq_sum, 1.0 / (static_cast<double>(f) * s));
    auto adv = ad::neg(ad::mean(critic.score_batch(fake_in)));
    return ad::add(adv, ad::scale(joint_term, lambda_j));
}

}  // namespace hvis::gen
