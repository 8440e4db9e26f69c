#include "hvis/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hvis/checkpoint.hpp"
#include "hvis/config.hpp"
#include "hvis/errors.hpp"
#include "hvis/synth.hpp"
#include "hvis/training.hpp"

namespace hvis::cli {

namespace {

namespace fs = std::filesystem;

// One string slot per config key, bound to a --kebab-case flag; only keys
// the user actually passed are applied, so flags override file values.
struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--config", flags.config_file, "key = value configuration file");
    for (const auto& key : TrainConfig::keys()) {
        cmd->add_option("--" + key, flags.values[key], "config key " + key)
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
}

TrainConfig config_from_flags(const CLI::App* cmd, const ConfigFlags& flags) {
    TrainConfig cfg;
    if (!flags.config_file.empty()) cfg = TrainConfig::from_file(flags.config_file);
    for (const auto& key : TrainConfig::keys()) {
        if (cmd->count("--" + key) > 0) cfg.set_key(key, flags.values.at(key));
    }
    cfg.apply_env();
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw DataError("short write to '" + path.string() + "'");
}

data::SkeletonSpec resolve_skeleton(const TrainConfig& cfg) {
    if (!cfg.skeleton_path.empty()) return data::SkeletonSpec::load(cfg.skeleton_path);
    if (!cfg.corpus_path.empty()) {
        const auto bundled = fs::path(cfg.corpus_path) / "skeleton.txt";
        if (fs::exists(bundled)) return data::SkeletonSpec::load(bundled);
    }
    return data::synthetic_skeleton();
}

std::vector<data::MotionSequence> resolve_corpus(const TrainConfig& cfg,
                                                 const data::SkeletonSpec& skeleton) {
    if (cfg.corpus_path.empty()) {
        return data::synth_corpus(skeleton, cfg.synth_sequences, cfg.synth_frames, cfg.seed, cfg.fps);
    }
    const fs::path dir(cfg.corpus_path);
    if (!fs::is_directory(dir)) {
        throw DataError("corpus path '" + dir.string() + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("corpus directory '" + dir.string() + "' has no CSV files");

    std::vector<data::MotionSequence> corpus;
    corpus.reserve(files.size());
    for (const auto& file : files) {
        auto seq = data::load_csv(file, skeleton);
        if (seq.fps != cfg.fps) seq = data::downsample(seq, cfg.fps);
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

void check_joint_counts(int corpus_joints, int model_joints) {
    if (corpus_joints != model_joints) {
        throw ContractError("corpus skeleton has " + std::to_string(corpus_joints) +
                            " joints, model expects " + std::to_string(model_joints));
    }
}

int cmd_train(const TrainConfig& cfg) {
    auto skeleton = resolve_skeleton(cfg);
    auto corpus = resolve_corpus(cfg, skeleton);
    auto split = train::split_corpus(corpus, cfg, skeleton.root());

    ad::Rng rng(cfg.seed);
    auto pipeline = train::Pipeline::create(skeleton, cfg, train::parse_variant(cfg.variant), rng);
    try {
        auto curve = train::adversarial_train(pipeline, split, rng);
        auto refine_stats = train::refine_stage(pipeline, split, rng);
        write_text(cfg.report_path + ".curve.csv", train::curve_csv(curve));
        std::ostringstream refine_csv;
        refine_csv.precision(17);
        refine_csv << "epoch,refine_loss\n";
        for (std::size_t e = 0; e < refine_stats.epoch_loss.size(); ++e) {
            refine_csv << e << "," << refine_stats.epoch_loss[e] << "\n";
        }
        write_text(cfg.report_path + ".refine.csv", refine_csv.str());
    } catch (const TrainingError& e) {
        write_text(cfg.report_path + ".diagnostics.txt", std::string(e.what()) + "\n");
        throw;
    }

    auto bundle = train::make_bundle(pipeline, data::corpus_fingerprint(corpus));
    bundle.save(cfg.checkpoint_path);

    auto rows = train::evaluate(pipeline, split.val);
    std::cout << "validation (" << split.val.size() << " windows)\n"
              << train::eval_table(rows) << "checkpoint written to " << cfg.checkpoint_path << "\n";
    return 0;
}

int cmd_eval(train::Pipeline& pipeline, const std::string& pred_csv, const std::string& truth_csv,
             std::uint64_t bundle_hash) {
    const auto& cfg = pipeline.cfg;

    std::vector<train::EvalRow> rows;
    if (!pred_csv.empty()) {
        std::vector<int> flags;
        auto pred_seq = data::load_csv(pred_csv, pipeline.skeleton, &flags);
        int n_pred = 0;
        for (int f : flags) n_pred += f;
        if (n_pred == 0) throw DataError("'" + pred_csv + "' has no frames flagged predicted=1");
        auto truth_seq = data::load_csv(truth_csv, pipeline.skeleton);
        if (truth_seq.frames() < n_pred) {
            throw ContractError("truth file has " + std::to_string(truth_seq.frames()) +
                                " frames, need at least " + std::to_string(n_pred));
        }
        const int n = pipeline.skeleton.joint_count();
        auto pred = ad::make_tensor({n_pred, n, 3}, 0.0);
        auto truth = ad::make_tensor({n_pred, n, 3}, 0.0);
        int out_f = 0;
        for (int f = 0; f < pred_seq.frames(); ++f) {
            if (!flags[static_cast<std::size_t>(f)]) continue;
            for (int j = 0; j < n; ++j) {
                for (int c = 0; c < 3; ++c) {
                    pred->values[(static_cast<std::size_t>(out_f) * n + j) * 3 + c] = pred_seq.at(f, j, c);
                }
            }
            ++out_f;
        }
        const int first_truth = truth_seq.frames() - n_pred;
        for (int f = 0; f < n_pred; ++f) {
            for (int j = 0; j < n; ++j) {
                for (int c = 0; c < 3; ++c) {
                    truth->values[(static_cast<std::size_t>(f) * n + j) * 3 + c] =
                        truth_seq.at(first_truth + f, j, c);
                }
            }
        }
        for (int ms : cfg.horizons_ms) {
            const int frame = cfg.horizon_frame(ms);
            if (frame > n_pred) {
                throw ParameterError("horizon " + std::to_string(ms) + "ms needs frame " +
                                     std::to_string(frame) + ", file has " + std::to_string(n_pred));
            }
            rows.push_back({"file", ms, frame, data::mpjpe_mm(pred, truth, {frame - 1})});
        }
    } else {
        auto skeleton = resolve_skeleton(cfg);
        check_joint_counts(skeleton.joint_count(), pipeline.skeleton.joint_count());
        auto corpus = resolve_corpus(cfg, skeleton);
        check_joint_counts(corpus.front().joints(), pipeline.skeleton.joint_count());
        if (data::corpus_fingerprint(corpus) != bundle_hash) {
            std::cout << "note: corpus differs from the training corpus\n";
        }
        std::vector<data::WindowPair> windows;
        for (const auto& seq : corpus) {
            auto w = data::make_windows(seq, cfg.o_frames, cfg.f_frames, cfg.window_stride,
                                        pipeline.skeleton.root());
            windows.insert(windows.end(), w.begin(), w.end());
        }
        if (windows.empty()) throw DataError("corpus yields no evaluation windows");
        rows = train::evaluate(pipeline, windows);
    }

    write_text(cfg.report_path + ".eval.csv", train::eval_csv(rows));
    write_text(cfg.report_path + ".eval.txt", train::eval_table(rows));
    std::cout << train::eval_table(rows);
    return 0;
}

int cmd_predict(const train::Pipeline& pipeline, const std::string& input, const std::string& output) {
    const auto& cfg = pipeline.cfg;
    const int n = pipeline.skeleton.joint_count();
    const int o_frames = cfg.o_frames, f_frames = cfg.f_frames;

    auto seq = data::load_csv(input, pipeline.skeleton);
    if (seq.frames() < o_frames) {
        throw ContractError("input has " + std::to_string(seq.frames()) + " frames, need at least " +
                            std::to_string(o_frames) + " observed frames");
    }

    const int first = seq.frames() - o_frames;
    const int root = pipeline.skeleton.root();
    double offset[3];
    for (int c = 0; c < 3; ++c) offset[c] = seq.at(seq.frames() - 1, root, c);

    data::WindowPair w;
    w.o_frames = o_frames;
    w.f_frames = f_frames;
    w.n_joints = n;
    w.observed = ad::make_tensor({o_frames, n, 3}, 0.0);
    w.future = ad::make_tensor({f_frames, n, 3}, 0.0);
    for (int f = 0; f < o_frames; ++f) {
        for (int j = 0; j < n; ++j) {
            for (int c = 0; c < 3; ++c) {
                w.observed->values[(static_cast<std::size_t>(f) * n + j) * 3 + c] =
                    seq.at(first + f, j, c) - offset[c];
            }
        }
    }

    auto frames = train::prediction_frames(pipeline.predict_final(w));

    auto out_seq = data::make_sequence(seq.frames() + f_frames, n, seq.fps, seq.label);
    std::vector<int> flags(static_cast<std::size_t>(seq.frames() + f_frames), 0);
    for (int f = 0; f < seq.frames(); ++f) {
        for (int j = 0; j < n; ++j) {
            for (int c = 0; c < 3; ++c) out_seq.at(f, j, c) = seq.at(f, j, c);
        }
    }
    for (int f = 0; f < f_frames; ++f) {
        flags[static_cast<std::size_t>(seq.frames() + f)] = 1;
        for (int j = 0; j < n; ++j) {
            for (int c = 0; c < 3; ++c) {
                out_seq.at(seq.frames() + f, j, c) =
                    frames->values[(static_cast<std::size_t>(f) * n + j) * 3 + c] + offset[c];
            }
        }
    }
    data::save_csv(output, out_seq, pipeline.skeleton, &flags);
    std::cout << "wrote " << f_frames << " predicted frames to " << output << "\n";
    return 0;
}

int cmd_ablate(const TrainConfig& cfg, const std::vector<std::string>& variant_names) {
    std::vector<train::Variant> variants;
    for (const auto& name : variant_names) variants.push_back(train::parse_variant(name));

    auto skeleton = resolve_skeleton(cfg);
    auto corpus = resolve_corpus(cfg, skeleton);
    auto report = train::run_ablation(skeleton, corpus, cfg, variants);

    write_text(cfg.report_path + ".ablation.csv", train::ablation_csv(report));
    write_text(cfg.report_path + ".ablation.txt", train::ablation_table(report));
    std::cout << train::ablation_table(report);
    return 0;
}

int cmd_synth(const TrainConfig& cfg, const std::string& out_dir) {
    auto skeleton = resolve_skeleton(cfg);
    auto corpus = data::synth_corpus(skeleton, cfg.synth_sequences, cfg.synth_frames, cfg.seed, cfg.fps);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    skeleton.save(dir / "skeleton.txt");
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%04zu.csv", s);
        data::save_csv(dir / name, corpus[s], skeleton);
    }
    std::cout << "wrote " << corpus.size() << " sequences to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"skeleton motion prediction: graph encoding, adversarial trajectory "
                 "generation and hard-joint refinement"};
    app.require_subcommand(1);

    ConfigFlags train_flags, eval_flags, ablate_flags, synth_flags;
    std::string eval_checkpoint, eval_pred_csv, eval_truth_csv;
    std::string predict_checkpoint, predict_input, predict_output;
    std::vector<std::string> ablate_variants;
    std::string synth_out;

    auto* train_cmd = app.add_subcommand("train", "two-stage training, writes a checkpoint");
    add_config_flags(train_cmd, train_flags);

    auto* eval_cmd = app.add_subcommand("eval", "per-horizon error report for a checkpoint");
    add_config_flags(eval_cmd, eval_flags);
    eval_cmd->add_option("--checkpoint-in", eval_checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--pred-csv", eval_pred_csv, "compare a predicted CSV against truth instead");
    eval_cmd->add_option("--truth-csv", eval_truth_csv, "truth CSV for --pred-csv");

    auto* predict_cmd = app.add_subcommand("predict", "extend an observed CSV with predicted frames");
    predict_cmd->add_option("--checkpoint-in", predict_checkpoint, "trained checkpoint")->required();
    predict_cmd->add_option("--input", predict_input, "observed motion CSV")->required();
    predict_cmd->add_option("--output", predict_output, "output CSV path")->required();

    auto* ablate_cmd = app.add_subcommand("ablate", "train and compare model variants");
    add_config_flags(ablate_cmd, ablate_flags);
    ablate_cmd->add_option("--variants", ablate_variants,
                           "variants beside full: no-hvm, no-trn, no-dln")
        ->delimiter(',');

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus directory");
    add_config_flags(synth_cmd, synth_flags);
    synth_cmd->add_option("--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);

        if (train_cmd->parsed()) return cmd_train(config_from_flags(train_cmd, train_flags));

        if (eval_cmd->parsed()) {
            if (eval_pred_csv.empty() != eval_truth_csv.empty()) {
                throw ParameterError("--pred-csv and --truth-csv must be given together");
            }
            auto bundle = CheckpointBundle::load(eval_checkpoint);
            auto pipeline = train::pipeline_from_bundle(bundle);
            // Only evaluation-side keys may override a trained model's config.
            for (const auto& key : {"horizons-ms", "window-stride", "report", "corpus",
                                    "skeleton", "fps", "synth-sequences", "synth-frames", "seed"}) {
                if (eval_cmd->count(std::string("--") + key) > 0) {
                    pipeline.cfg.set_key(key, eval_flags.values.at(key));
                }
            }
            pipeline.cfg.apply_env();
            pipeline.cfg.validate();
            return cmd_eval(pipeline, eval_pred_csv, eval_truth_csv, bundle.corpus_hash);
        }

        if (predict_cmd->parsed()) {
            auto bundle = CheckpointBundle::load(predict_checkpoint);
            auto pipeline = train::pipeline_from_bundle(bundle);
            return cmd_predict(pipeline, predict_input, predict_output);
        }

        if (ablate_cmd->parsed()) {
            return cmd_ablate(config_from_flags(ablate_cmd, ablate_flags), ablate_variants);
        }

        if (synth_cmd->parsed()) return cmd_synth(config_from_flags(synth_cmd, synth_flags), synth_out);

        throw ParameterError("no subcommand given");
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            return app.exit(e);  // --help and friends
        }
        app.exit(e);
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace hvis::cli
