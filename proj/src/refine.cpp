#include "hvis/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "hvis/errors.hpp"

namespace hvis::dln {

using ad::TensorPtr;

std::string DeliberateMap::to_text() const {
    std::ostringstream out;
    out << "m " << m << "\n";
    char buf[64];
    for (int j : ranking) {
        std::snprintf(buf, sizeof(buf), "%.17g", per_joint_error[j]);
        const bool sel = std::find(selected.begin(), selected.end(), j) != selected.end();
        out << j << " " << buf << " " << (sel ? 1 : 0) << "\n";
    }
    return out.str();
}

DeliberateMap DeliberateMap::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    DeliberateMap map;
    if (!(in >> tag >> map.m) || tag != "m")
        throw FormatError("deliberate map: expected leading 'm <count>' line");
    std::vector<std::pair<int, std::pair<double, int>>> rows;
    int joint, flag;
    double err;
    while (in >> joint >> err >> flag) rows.emplace_back(joint, std::make_pair(err, flag));
    if (!in.eof()) throw FormatError("deliberate map: trailing unparsable content");
    const int n = static_cast<int>(rows.size());
    if (map.m < 0 || map.m > n) throw FormatError("deliberate map: selection count out of range");
    map.per_joint_error.assign(n, 0.0);
    std::vector<char> seen(n, 0);
    for (const auto& [j, rest] : rows) {
        if (j < 0 || j >= n || seen[j]) throw FormatError("deliberate map: bad or duplicate joint index");
        seen[j] = 1;
        map.per_joint_error[j] = rest.first;
        map.ranking.push_back(j);
        if (rest.second) map.selected.push_back(j);
    }
    if (static_cast<int>(map.selected.size()) != map.m)
        throw FormatError("deliberate map: selected flags disagree with the declared count");
    return map;
}

DeliberateMap rank_joints(const std::vector<double>& per_joint_error, int m) {
    const int n = static_cast<int>(per_joint_error.size());
    if (n == 0) throw ContractError("rank_joints: empty error vector");
    if (m < 1 || m > n)
        throw ParameterError("rank_joints: selection count " + std::to_string(m) + " outside [1, " +
                             std::to_string(n) + "]");
    DeliberateMap map;
    map.per_joint_error = per_joint_error;
    map.m = m;
    map.ranking.resize(n);
    std::iota(map.ranking.begin(), map.ranking.end(), 0);
    std::stable_sort(map.ranking.begin(), map.ranking.end(), [&](int a, int b) {
        if (per_joint_error[a] != per_joint_error[b]) return per_joint_error[a] > per_joint_error[b];
        return a < b;
    });
    map.selected.assign(map.ranking.begin(), map.ranking.begin() + m);
    return map;
}

std::vector<double> per_joint_errors(const std::function<ad::TensorPtr(const data::WindowPair&)>& predict,
                                     const std::vector<data::WindowPair>& windows, int n_joints) {
    if (windows.empty()) throw ContractError("per_joint_errors: empty validation window set");
    std::vector<double> acc(n_joints, 0.0);
    long frames = 0;
    for (const auto& w : windows) {
        if (w.n_joints != n_joints)
            throw ContractError("per_joint_errors: window has " + std::to_string(w.n_joints) +
                                " joints, expected " + std::to_string(n_joints));
        auto pred = predict(w);
        if (pred->rank() != 2 || pred->rows() != 3 * n_joints || pred->cols() != w.f_frames)
            throw DimensionError("per_joint_errors: prediction must be [" + std::to_string(3 * n_joints) + " x " +
                                 std::to_string(w.f_frames) + "], got " + ad::shape_str(pred->shape));
        for (int t = 0; t < w.f_frames; ++t)
            for (int j = 0; j < n_joints; ++j) {
                double sq = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double d = pred->at(j * 3 + c, t) - w.fut(t, j, c);
                    sq += d * d;
                }
                acc[j] += std::sqrt(sq);
            }
        frames += w.f_frames;
    }
    for (double& v : acc) v = 1000.0 * v / static_cast<double>(frames);
    return acc;
}

RefineNet RefineNet::create(int n_selected, int o_frames, int f_frames, int channels, ad::Rng& rng) {
    if (n_selected < 1 || o_frames < 1 || f_frames < 1 || channels < 1)
        throw ParameterError("RefineNet: selection, window lengths and width must be positive");
    RefineNet net;
    net.n_selected = n_selected;
    net.o_frames = o_frames;
    net.f_frames = f_frames;
    net.channels = channels;
    net.blocks.push_back(gen::make_tcn_block(3 * n_selected, channels, 3, {1, 2, 4, 8}, net.dropout_rate, rng));
    net.blocks.push_back(gen::make_tcn_block(channels, channels, 3, {1, 2, 4, 8}, net.dropout_rate, rng));
    net.blocks.push_back(gen::make_tcn_block(channels, channels, 3, {1, 2, 4, 8}, net.dropout_rate, rng));
    for (int i = 0; i < n_selected; ++i) {
        net.head_w.push_back(ad::xavier_mat(3 * f_frames, channels, rng));
        net.head_b.push_back(ad::zeros({3 * f_frames}));
    }
    return net;
}

void RefineNet::register_params(ad::ParamSet& params, const std::string& prefix) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
        gen::register_tcn_block(params, prefix + "block" + std::to_string(b) + ".", blocks[b]);
    for (std::size_t i = 0; i < head_w.size(); ++i) {
        params.add(prefix + "head" + std::to_string(i) + ".w", head_w[i]);
        params.add(prefix + "head" + std::to_string(i) + ".b", head_b[i]);
    }
}

ad::TensorPtr RefineNet::forward(const ad::TensorPtr& obs_selected, bool train, ad::Rng& rng) const {
    if (obs_selected->rank() != 2 || obs_selected->rows() != 3 * n_selected ||
        obs_selected->cols() != o_frames)
        throw DimensionError("refine forward: expected [" + std::to_string(3 * n_selected) + " x " +
                             std::to_string(o_frames) + "], got " + ad::shape_str(obs_selected->shape));
    auto h = obs_selected;
    for (const auto& block : blocks) h = gen::tcn_block_forward(h, block, o_frames, train, rng);
    auto last_feat = ad::slice_cols(h, o_frames - 1, 1);           // [channels x 1]
    auto last_col = ad::slice_cols(obs_selected, o_frames - 1, 1);  // [3m x 1]
    std::vector<TensorPtr> rows;
    rows.reserve(n_selected);
    for (int i = 0; i < n_selected; ++i) {
        auto off = ad::add_bias_cols(ad::matmul(head_w[i], last_feat), head_b[i]);  // [3F x 1]
        auto frames = ad::reshape(off, {3, f_frames});
        auto base = ad::reshape(ad::slice_rows(last_col, i * 3, 3), {3});
        rows.push_back(ad::add_bias_cols(frames, base));
    }
    auto acc = rows[0];
    for (std::size_t i = 1; i < rows.size(); ++i) acc = ad::concat_rows(acc, rows[i]);
    return acc;
}

ad::TensorPtr RefineNet::forward_batch(const ad::TensorPtr& x, const ad::TensorPtr& last_pos, bool train,
                                       ad::Rng& rng) const {
    const int b = x->cols() / o_frames;
    if (x->rank() != 2 || x->rows() != 3 * n_selected || x->cols() != b * o_frames)
        throw DimensionError("refine forward_batch: expected [" + std::to_string(3 * n_selected) +
                             " x O*B], got " + ad::shape_str(x->shape));
    if (last_pos->rank() != 2 || last_pos->rows() != 3 * n_selected || last_pos->cols() != b)
        throw DimensionError("refine forward_batch: last positions must be [" + std::to_string(3 * n_selected) +
                             " x " + std::to_string(b) + "], got " + ad::shape_str(last_pos->shape));
    auto h = x;
    for (const auto& block : blocks) h = gen::tcn_block_forward(h, block, o_frames, train, rng);
    std::vector<int> last_idx(b);
    for (int s = 0; s < b; ++s) last_idx[s] = s * o_frames + o_frames - 1;
    auto last_feat = ad::gather_cols(h, last_idx);  // [channels x B]
    std::vector<TensorPtr> parts;
    parts.reserve(n_selected);
    for (int i = 0; i < n_selected; ++i) {
        auto off = ad::add_bias_cols(ad::matmul(head_w[i], last_feat), head_b[i]);  // [3F x B]
        auto base = ad::repeat_rows_each(ad::slice_rows(last_pos, i * 3, 3), f_frames);
        parts.push_back(ad::add(off, base));
    }
    auto acc = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) acc = ad::concat_rows(acc, parts[i]);
    return acc;  // [3mF x B]
}

ad::TensorPtr selected_obs_matrix(const data::WindowPair& w, const DeliberateMap& map) {
    auto m = ad::make_tensor({3 * map.m, w.o_frames});
    for (int i = 0; i < map.m; ++i) {
        const int j = map.selected[i];
        for (int c = 0; c < 3; ++c)
            for (int t = 0; t < w.o_frames; ++t) m->at(i * 3 + c, t) = w.obs(t, j, c);
    }
    return m;
}

ad::TensorPtr selected_future_matrix(const data::WindowPair& w, const DeliberateMap& map) {
    auto m = ad::make_tensor({3 * map.m, w.f_frames});
    for (int i = 0; i < map.m; ++i) {
        const int j = map.selected[i];
        for (int c = 0; c < 3; ++c)
            for (int t = 0; t < w.f_frames; ++t) m->at(i * 3 + c, t) = w.fut(t, j, c);
    }
    return m;
}

ad::TensorPtr fuse_predictions(const ad::TensorPtr& sln_pred, const ad::TensorPtr& dtc_pred,
                               const DeliberateMap& map) {
    if (map.m == 0) return sln_pred;
    if (dtc_pred->rank() != 2 || dtc_pred->rows() != 3 * map.m || dtc_pred->cols() != sln_pred->cols())
        throw ContractError("fuse_predictions: refiner output " + ad::shape_str(dtc_pred->shape) +
                            " does not cover " + std::to_string(map.m) + " joints over " +
                            std::to_string(sln_pred->cols()) + " frames");
    for (int j : map.selected)
        if (3 * j + 2 >= sln_pred->rows())
            throw ContractError("fuse_predictions: selected joint " + std::to_string(j) +
                                " outside the base prediction");
    auto out = ad::make_tensor(sln_pred->shape, sln_pred->values);
    const int f = sln_pred->cols();
    for (int i = 0; i < map.m; ++i) {
        const int j = map.selected[i];
        for (int c = 0; c < 3; ++c)
            for (int t = 0; t < f; ++t) out->at(j * 3 + c, t) = dtc_pred->at(i * 3 + c, t);
    }
    return out;
}

DlnTrainStats dln_train(RefineNet& net, const std::vector<data::WindowPair>& windows, const DeliberateMap& map,
                        int epochs, int batch_size, double lr, ad::Rng& rng, double divergence_guard) {
    if (map.m != net.n_selected)
        throw ContractError("dln_train: refiner covers " + std::to_string(net.n_selected) +
                            " joints, map selects " + std::to_string(map.m));
    if (windows.empty()) throw ContractError("dln_train: no training windows");
    if (batch_size < 1) throw ParameterError("dln_train: batch size must be positive");

    ad::ParamSet params;
    net.register_params(params, "refine.");
    ad::Adam::Config cfg;
    cfg.lr = lr;
    ad::Adam adam(params, cfg);

    DlnTrainStats stats;
    std::vector<int> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const int b = static_cast<int>(std::min<std::size_t>(batch_size, order.size() - start));
            std::vector<TensorPtr> obs_parts;
            auto last_pos = ad::make_tensor({3 * map.m, b});
            auto truth = ad::make_tensor({3 * map.m * net.f_frames, b});
            for (int k = 0; k < b; ++k) {
                const auto& w = windows[order[start + k]];
                obs_parts.push_back(selected_obs_matrix(w, map));
                for (int i = 0; i < map.m; ++i) {
                    const int j = map.selected[i];
                    for (int c = 0; c < 3; ++c) {
                        last_pos->at(i * 3 + c, k) = w.obs(w.o_frames - 1, j, c);
                        for (int t = 0; t < net.f_frames; ++t)
                            truth->at(i * 3 * net.f_frames + c * net.f_frames + t, k) = w.fut(t, j, c);
                    }
                }
            }
            auto x = obs_parts.size() == 1 ? obs_parts[0] : ad::concat_cols(obs_parts);
            ad::Tape tape;
            double loss_val;
            {
                ad::TapeScope scope(tape);
                auto pred = net.forward_batch(x, last_pos, true, rng);
                auto d = ad::sub(pred, truth);
                auto loss = ad::scale(ad::sum(ad::mul(d, d)),
                                      1.0 / (static_cast<double>(net.f_frames) * map.m * b));
                loss_val = loss->scalar();
                if (!std::isfinite(loss_val) || loss_val > divergence_guard)
                    throw TrainingError("refiner training diverged: loss " + std::to_string(loss_val));
                adam.zero_grad();
                tape.backward(loss);
            }
            adam.step();
            epoch_loss += loss_val;
            ++batches;
        }
        stats.epoch_loss.push_back(epoch_loss / std::max(1, batches));
    }
    return stats;
}

}  // namespace hvis::dln
