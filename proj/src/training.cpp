#include "hvis/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hvis/errors.hpp"

namespace hvis::train {

namespace {

// Divergence means growth, not scale: the cap adapts to the first batch's
// loss so unit choices in the data cannot trip it.
constexpr double kDivergenceFloor = 1e6;
constexpr double kDivergenceGrowth = 1e4;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
    }
    return h;
}

// True future positions per decode step: F tensors [3 x B*N], column
// s = w*N + i, matching the decoder's batch layout.
std::vector<ad::TensorPtr> truth_steps(const std::vector<data::WindowPair>& batch) {
    const int b = static_cast<int>(batch.size());
    const int n = batch.front().n_joints;
    const int f_frames = batch.front().f_frames;
    std::vector<ad::TensorPtr> steps;
    steps.reserve(f_frames);
    for (int f = 0; f < f_frames; ++f) {
        auto t = ad::make_tensor({3, b * n}, 0.0);
        for (int w = 0; w < b; ++w) {
            for (int i = 0; i < n; ++i) {
                for (int c = 0; c < 3; ++c) {
                    t->values[static_cast<std::size_t>(c) * b * n + w * n + i] =
                        batch[w].fut(f, i, c);
                }
            }
        }
        steps.push_back(t);
    }
    return steps;
}

double window_mpjpe(const Pipeline& p, const data::WindowPair& w,
                    const std::vector<int>& frames) {
    auto pred = prediction_frames(p.predict_base(w));
    return data::mpjpe_mm(pred, w.future, frames);
}

double probe_mpjpe(const Pipeline& p, const std::vector<data::WindowPair>& val, int max_windows) {
    const std::size_t count = std::min<std::size_t>(val.size(), static_cast<std::size_t>(max_windows));
    if (count == 0) return 0;
    double sum = 0;
    for (std::size_t i = 0; i < count; ++i) sum += window_mpjpe(p, val[i], {});
    return sum / static_cast<double>(count);
}

// Mean distance in millimeters over the given joints and frame indices,
// with one raw [3N x F] prediction per window.
double selected_frame_err(const std::vector<ad::TensorPtr>& preds,
                          const std::vector<data::WindowPair>& windows,
                          const std::vector<int>& joints, const std::vector<int>& frame_idx) {
    double acc = 0;
    long count = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        for (int t : frame_idx)
            for (int j : joints) {
                double sq = 0;
                for (int c = 0; c < 3; ++c) {
                    const double d = preds[i]->at(j * 3 + c, t) - w.fut(t, j, c);
                    sq += d * d;
                }
                acc += std::sqrt(sq);
                ++count;
            }
    }
    return 1000.0 * acc / static_cast<double>(count);
}

}  // namespace

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "no-hvm") return Variant::NoHvm;
    if (name == "no-trn") return Variant::NoTrn;
    if (name == "no-dln") return Variant::NoDln;
    throw ParameterError("unknown variant '" + name + "', expected full, no-hvm, no-trn or no-dln");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoHvm: return "no-hvm";
        case Variant::NoTrn: return "no-trn";
        case Variant::NoDln: return "no-dln";
    }
    throw ContractError("variant_name: bad enum value");
}

Pipeline Pipeline::create(const data::SkeletonSpec& skeleton, const cli::TrainConfig& cfg,
                          Variant variant, ad::Rng& rng) {
    cfg.validate();
    skeleton.validate();
    const int n = skeleton.joint_count();

    Pipeline p;
    p.skeleton = skeleton;
    p.cfg = cfg;
    p.cfg.variant = variant_name(variant);
    p.variant = variant;

    auto kind = variant == Variant::NoHvm ? enc::EncoderKind::PlainGcn : enc::EncoderKind::Multiscale;
    p.encoder = enc::MotionEncoder::create(skeleton, cfg.o_frames, cfg.encoder_channels, kind, rng);

    gen::GeneratorConfig gcfg;
    gcfg.n_joints = n;
    gcfg.feature_channels = cfg.encoder_channels;
    gcfg.o_frames = cfg.o_frames;
    gcfg.f_frames = cfg.f_frames;
    gcfg.channels = cfg.tcn_channels;
    gcfg.hidden = cfg.hidden;
    gcfg.recurrent_only = variant == Variant::NoTrn;
    p.generator = gen::Generator::create(gcfg, rng);

    const int critic_in = 3 * n * (cfg.o_frames + cfg.f_frames);
    p.critic = gen::Critic::create(critic_in, cfg.critic_hidden, rng);
    return p;
}

void Pipeline::ensure_refiner(ad::Rng& rng) {
    if (map.m < 1) throw ContractError("ensure_refiner: joint map is empty");
    refiner = dln::RefineNet::create(map.m, cfg.o_frames, cfg.f_frames, cfg.refine_channels, rng);
    has_refiner = true;
}

ad::ParamSet Pipeline::generator_params() const {
    ad::ParamSet ps;
    encoder.register_params(ps, "encoder.");
    generator.register_params(ps, "generator.");
    return ps;
}

ad::ParamSet Pipeline::critic_params() const {
    ad::ParamSet ps;
    critic.register_params(ps, "critic.");
    return ps;
}

ad::ParamSet Pipeline::all_params() const {
    ad::ParamSet ps = generator_params();
    critic.register_params(ps, "critic.");
    if (has_refiner) refiner.register_params(ps, "refiner.");
    return ps;
}

ad::TensorPtr Pipeline::predict_base(const data::WindowPair& w) const {
    ad::EvalScope eval;
    ad::Rng unused(0);
    std::vector<data::WindowPair> one{w};
    auto features = encoder.forward_batch(one);
    auto latent = generator.latent_batch(features, 1, false, unused);
    auto steps = generator.decode_batch(latent, gen::last_positions(one));
    return gen::assemble_future(steps, skeleton.joint_count(), 0);
}

ad::TensorPtr Pipeline::predict_final(const data::WindowPair& w) const {
    auto base = predict_base(w);
    if (!has_refiner || map.m == 0) return base;
    ad::EvalScope eval;
    ad::Rng unused(0);
    auto refined = refiner.forward(dln::selected_obs_matrix(w, map), false, unused);
    return dln::fuse_predictions(base, refined, map);
}

ad::TensorPtr prediction_frames(const ad::TensorPtr& pred) {
    if (pred->rank() != 2 || pred->rows() % 3 != 0) {
        throw DimensionError("prediction_frames: expected [3N x F], got " + ad::shape_str(pred->shape));
    }
    const int n = pred->rows() / 3;
    const int f_frames = pred->cols();
    auto out = ad::make_tensor({f_frames, n, 3}, 0.0);
    for (int f = 0; f < f_frames; ++f) {
        for (int j = 0; j < n; ++j) {
            for (int c = 0; c < 3; ++c) {
                out->values[(static_cast<std::size_t>(f) * n + j) * 3 + c] =
                    pred->at(j * 3 + c, f);
            }
        }
    }
    return out;
}

SplitResult split_corpus(const std::vector<data::MotionSequence>& corpus,
                         const cli::TrainConfig& cfg, int root_joint) {
    if (corpus.size() < 2) {
        throw DataError("split: need at least 2 sequences, got " + std::to_string(corpus.size()));
    }
    auto n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(corpus.size()) * cfg.val_fraction));
    if (n_val < 1) n_val = 1;
    if (n_val >= corpus.size()) n_val = corpus.size() - 1;
    const std::size_t n_train = corpus.size() - n_val;

    SplitResult split;
    std::uint64_t h = 14695981039346656037ull;
    h = fnv_mix(h, corpus.size());
    h = fnv_mix(h, n_train);
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        auto windows = data::make_windows(corpus[s], cfg.o_frames, cfg.f_frames,
                                          cfg.window_stride, root_joint);
        h = fnv_mix(h, windows.size());
        auto& side = s < n_train ? split.train : split.val;
        side.insert(side.end(), windows.begin(), windows.end());
    }
    split.split_hash = h;
    if (split.train.empty() || split.val.empty()) {
        throw DataError("split: sequences too short for one window of " +
                        std::to_string(cfg.o_frames + cfg.f_frames) + " frames");
    }
    return split;
}

TrainCurve adversarial_train(Pipeline& p, const SplitResult& split, ad::Rng& rng) {
    const auto& cfg = p.cfg;
    const int n = p.skeleton.joint_count();

    auto gen_params = p.generator_params();
    auto critic_params = p.critic_params();
    ad::Adam::Config opt_cfg;
    opt_cfg.lr = cfg.learning_rate;
    ad::Adam gen_opt(gen_params, opt_cfg);
    ad::Adam critic_opt(critic_params, opt_cfg);

    // Constant per window across all epochs: the critic's real input column
    // and the flattened observed block reused inside fake inputs.
    std::vector<ad::TensorPtr> real_cols, obs_flat;
    real_cols.reserve(split.train.size());
    obs_flat.reserve(split.train.size());
    {
        ad::EvalScope eval;
        for (const auto& w : split.train) {
            auto obs = gen::window_obs_matrix(w);
            auto fut = gen::window_future_matrix(w);
            real_cols.push_back(gen::critic_input(obs, fut));
            obs_flat.push_back(ad::reshape(obs, {3 * n * cfg.o_frames}));
        }
    }

    std::vector<int> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);

    double guard = kDivergenceFloor;
    bool guard_armed = false;
    TrainCurve curve;
    for (int epoch = 0; epoch < cfg.epochs_sln; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double gen_loss_sum = 0, critic_obj_sum = 0;
        int batches = 0;

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const int b = static_cast<int>(end - start);
            std::vector<data::WindowPair> batch;
            std::vector<ad::TensorPtr> batch_real;
            batch.reserve(b);
            batch_real.reserve(b);
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(split.train[static_cast<std::size_t>(order[k])]);
                batch_real.push_back(real_cols[static_cast<std::size_t>(order[k])]);
            }

            // The critic's fakes for this batch are drawn once and reused
            // across its n_critic updates.
            ad::TensorPtr real_in, fake_in;
            {
                ad::EvalScope eval;
                real_in = ad::stack_cols(batch_real);
                auto features = p.encoder.forward_batch(batch);
                auto latent = p.generator.latent_batch(features, b, true, rng);
                auto steps = p.generator.decode_batch(latent, gen::last_positions(batch));
                std::vector<ad::TensorPtr> cols;
                cols.reserve(b);
                for (int i = 0; i < b; ++i) {
                    auto fut = ad::reshape(gen::assemble_future(steps, n, i), {3 * n * cfg.f_frames});
                    cols.push_back(ad::concat_vec({obs_flat[static_cast<std::size_t>(order[start + i])], fut}));
                }
                fake_in = ad::stack_cols(cols);
            }

            double objective = 0;
            for (int step = 0; step < cfg.n_critic; ++step) {
                ad::Tape tape;
                ad::TapeScope scope(tape);
                auto loss = gen::critic_loss(p.critic, real_in, fake_in);
                objective = -loss->scalar();
                if (!std::isfinite(objective)) {
                    throw TrainingError("critic loss is not finite at epoch " + std::to_string(epoch));
                }
                critic_opt.zero_grad();
                tape.backward(loss);
                critic_opt.step();
                p.critic.clip(cfg.clip_c);
            }
            critic_obj_sum += objective;

            ad::Tape tape;
            ad::TapeScope scope(tape);
            auto features = p.encoder.forward_batch(batch);
            auto latent = p.generator.latent_batch(features, b, true, rng);
            auto steps = p.generator.decode_batch(latent, gen::last_positions(batch));
            std::vector<ad::TensorPtr> cols;
            cols.reserve(b);
            for (int i = 0; i < b; ++i) {
                auto fut = ad::reshape(gen::assemble_future(steps, n, i), {3 * n * cfg.f_frames});
                cols.push_back(ad::concat_vec({obs_flat[static_cast<std::size_t>(order[start + i])], fut}));
            }
            auto fake_gen = ad::stack_cols(cols);
            auto loss = gen::generator_loss(p.critic, fake_gen, steps, truth_steps(batch), cfg.lambda_j);
            const double gl = loss->scalar();
            if (!guard_armed) {
                guard = std::max(kDivergenceFloor, kDivergenceGrowth * (std::abs(gl) + 1.0));
                guard_armed = true;
            }
            if (!std::isfinite(gl) || std::abs(gl) > guard) {
                throw TrainingError("generator loss diverged at epoch " + std::to_string(epoch) +
                                    ": " + std::to_string(gl));
            }
            gen_opt.zero_grad();
            tape.backward(loss);
            gen_opt.step();
            gen_loss_sum += gl;
            ++batches;
        }

        EpochRow row;
        row.epoch = epoch;
        row.generator_loss = batches ? gen_loss_sum / batches : 0;
        row.critic_objective = batches ? critic_obj_sum / batches : 0;
        row.val_mpjpe = probe_mpjpe(p, split.val, cfg.val_probe_windows);
        curve.rows.push_back(row);
    }
    return curve;
}

dln::DlnTrainStats refine_stage(Pipeline& p, const SplitResult& split, ad::Rng& rng) {
    if (p.variant == Variant::NoDln) {
        p.map = dln::DeliberateMap{};
        p.has_refiner = false;
        return {};
    }
    const int n = p.skeleton.joint_count();
    auto errs = dln::per_joint_errors(
        [&p](const data::WindowPair& w) { return p.predict_base(w); }, split.val, n);
    p.map = dln::rank_joints(errs, p.cfg.resolve_m(n));
    p.ensure_refiner(rng);
    return dln::dln_train(p.refiner, split.train, p.map, p.cfg.epochs_dln, p.cfg.batch_size,
                          p.cfg.learning_rate, rng);
}

std::vector<EvalRow> evaluate(const Pipeline& p, const std::vector<data::WindowPair>& windows) {
    if (windows.empty()) throw DataError("evaluate: no windows to score");

    std::vector<ad::TensorPtr> zv, base, fin;
    zv.reserve(windows.size());
    base.reserve(windows.size());
    fin.reserve(windows.size());
    for (const auto& w : windows) {
        zv.push_back(data::zero_velocity_baseline(w.observed, w.f_frames));
        auto b = p.predict_base(w);
        base.push_back(prediction_frames(b));
        if (p.has_refiner && p.map.m > 0) {
            ad::EvalScope eval;
            ad::Rng unused(0);
            auto refined = p.refiner.forward(dln::selected_obs_matrix(w, p.map), false, unused);
            fin.push_back(prediction_frames(dln::fuse_predictions(b, refined, p.map)));
        } else {
            fin.push_back(base.back());
        }
    }

    auto mean_mpjpe = [&windows](const std::vector<ad::TensorPtr>& preds, const std::vector<int>& frames) {
        double sum = 0;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            sum += data::mpjpe_mm(preds[i], windows[i].future, frames);
        }
        return sum / static_cast<double>(windows.size());
    };

    std::vector<EvalRow> rows;
    for (int ms : p.cfg.horizons_ms) {
        const int frame = p.cfg.horizon_frame(ms);
        const std::vector<int> idx{frame - 1};
        rows.push_back({"zero-velocity", ms, frame, mean_mpjpe(zv, idx)});
        rows.push_back({"base", ms, frame, mean_mpjpe(base, idx)});
        rows.push_back({"refined", ms, frame, mean_mpjpe(fin, idx)});
    }
    return rows;
}

AblationReport run_ablation(const data::SkeletonSpec& skeleton,
                            const std::vector<data::MotionSequence>& corpus,
                            const cli::TrainConfig& cfg, const std::vector<Variant>& variants) {
    auto split = split_corpus(corpus, cfg, skeleton.root());

    std::vector<Variant> order{Variant::Full};
    for (Variant v : variants) {
        if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
    }

    AblationReport report;
    report.horizons_ms = cfg.horizons_ms;
    std::vector<int> hard_joints;  // from the full model, shared by every row

    for (Variant v : order) {
        ad::Rng rng(cfg.seed);
        Pipeline p = Pipeline::create(skeleton, cfg, v, rng);
        adversarial_train(p, split, rng);
        refine_stage(p, split, rng);
        if (v == Variant::Full) hard_joints = p.map.selected;

        std::vector<ad::TensorPtr> base_preds, final_preds;
        base_preds.reserve(split.val.size());
        final_preds.reserve(split.val.size());
        {
            ad::EvalScope eval;
            for (const auto& w : split.val) {
                base_preds.push_back(p.predict_base(w));
                final_preds.push_back(p.predict_final(w));
            }
        }

        std::vector<int> horizon_idx;
        horizon_idx.reserve(cfg.horizons_ms.size());
        for (int ms : cfg.horizons_ms) horizon_idx.push_back(cfg.horizon_frame(ms) - 1);

        AblationEntry entry;
        entry.variant = variant_name(v);
        entry.split_hash = split.split_hash;
        entry.selected_err_base = selected_frame_err(base_preds, split.val, hard_joints, horizon_idx);
        entry.selected_err_final = selected_frame_err(final_preds, split.val, hard_joints, horizon_idx);
        for (std::size_t h = 0; h < horizon_idx.size(); ++h) {
            const std::vector<int> idx{horizon_idx[h]};
            double sum = 0;
            for (std::size_t i = 0; i < split.val.size(); ++i) {
                sum += data::mpjpe_mm(prediction_frames(final_preds[i]), split.val[i].future, idx);
            }
            entry.mpjpe_by_horizon.push_back(sum / static_cast<double>(split.val.size()));
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

std::string curve_csv(const TrainCurve& curve) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,generator_loss,critic_objective,val_mpjpe\n";
    for (const auto& r : curve.rows) {
        out << r.epoch << "," << r.generator_loss << "," << r.critic_objective << ","
            << r.val_mpjpe << "\n";
    }
    return out.str();
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "predictor,horizon_ms,horizon_frame,mpjpe_mm\n";
    for (const auto& r : rows) {
        out << r.predictor << "," << r.horizon_ms << "," << r.horizon_frame << "," << r.mpjpe << "\n";
    }
    return out.str();
}

std::string eval_table(const std::vector<EvalRow>& rows) {
    std::vector<int> horizons;
    std::vector<std::string> predictors;
    for (const auto& r : rows) {
        if (std::find(horizons.begin(), horizons.end(), r.horizon_ms) == horizons.end()) {
            horizons.push_back(r.horizon_ms);
        }
        if (std::find(predictors.begin(), predictors.end(), r.predictor) == predictors.end()) {
            predictors.push_back(r.predictor);
        }
    }
    std::ostringstream out;
    out << "mpjpe (mm)    ";
    for (int ms : horizons) {
        char cell[16];
        std::snprintf(cell, sizeof(cell), "%9dms", ms);
        out << cell;
    }
    out << "\n";
    for (const auto& p : predictors) {
        char name[32];
        std::snprintf(name, sizeof(name), "%-14s", p.c_str());
        out << name;
        for (int ms : horizons) {
            for (const auto& r : rows) {
                if (r.predictor == p && r.horizon_ms == ms) {
                    char cell[16];
                    std::snprintf(cell, sizeof(cell), "%11.3f", r.mpjpe);
                    out << cell;
                }
            }
        }
        out << "\n";
    }
    return out.str();
}

std::string ablation_csv(const AblationReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "variant,horizon_ms,mpjpe_mm,selected_base_mm,selected_final_mm,split_hash\n";
    for (const auto& e : report.entries) {
        for (std::size_t i = 0; i < report.horizons_ms.size(); ++i) {
            out << e.variant << "," << report.horizons_ms[i] << "," << e.mpjpe_by_horizon[i] << ","
                << e.selected_err_base << "," << e.selected_err_final << "," << e.split_hash << "\n";
        }
    }
    return out.str();
}

std::string ablation_table(const AblationReport& report) {
    std::ostringstream out;
    out << "variant       ";
    for (int ms : report.horizons_ms) {
        char cell[16];
        std::snprintf(cell, sizeof(cell), "%9dms", ms);
        out << cell;
    }
    out << "   sel-base  sel-final\n";
    for (const auto& e : report.entries) {
        char name[32];
        std::snprintf(name, sizeof(name), "%-14s", e.variant.c_str());
        out << name;
        for (double v : e.mpjpe_by_horizon) {
            char cell[16];
            std::snprintf(cell, sizeof(cell), "%11.3f", v);
            out << cell;
        }
        char tail[32];
        std::snprintf(tail, sizeof(tail), "%11.3f%11.3f", e.selected_err_base, e.selected_err_final);
        out << tail << "\n";
    }
    return out.str();
}

cli::CheckpointBundle make_bundle(const Pipeline& p, std::uint64_t corpus_hash) {
    cli::CheckpointBundle bundle;
    bundle.config_text = p.cfg.to_text();
    bundle.skeleton_text = p.skeleton.to_text();
    bundle.map_text = p.map.m > 0 ? p.map.to_text() : "";
    bundle.corpus_hash = corpus_hash;
    bundle.tensors = p.all_params().items;
    return bundle;
}

Pipeline pipeline_from_bundle(const cli::CheckpointBundle& bundle) {
    auto cfg = cli::TrainConfig::from_text(bundle.config_text);
    auto skeleton = data::SkeletonSpec::from_text(bundle.skeleton_text);
    ad::Rng rng(cfg.seed);
    Pipeline p = Pipeline::create(skeleton, cfg, parse_variant(cfg.variant), rng);
    if (!bundle.map_text.empty()) {
        p.map = dln::DeliberateMap::from_text(bundle.map_text);
        p.ensure_refiner(rng);
    }

    auto params = p.all_params();
    if (params.items.size() != bundle.tensors.size()) {
        throw ContractError("checkpoint holds " + std::to_string(bundle.tensors.size()) +
                            " tensors, model has " + std::to_string(params.items.size()));
    }
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        const auto& [want_name, dst] = params.items[i];
        const auto& [got_name, src] = bundle.tensors[i];
        if (want_name != got_name) {
            throw ContractError("checkpoint tensor '" + got_name + "' where '" + want_name +
                                "' was expected");
        }
        if (src->shape != dst->shape) {
            throw ContractError("checkpoint tensor '" + got_name + "' has shape " +
                                ad::shape_str(src->shape) + ", model expects " +
                                ad::shape_str(dst->shape));
        }
        dst->values = src->values;
    }
    return p;
}

}  // namespace hvis::train
