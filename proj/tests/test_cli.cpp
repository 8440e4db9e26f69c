#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hvis/checkpoint.hpp"
#include "hvis/cli.hpp"
#include "hvis/errors.hpp"
#include "hvis/synth.hpp"
#include "hvis/training.hpp"

using namespace hvis;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"hvis"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "hvis_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small everything: 6 short sequences, narrow nets, O=10, F=5.
std::vector<std::string> tiny_flags(const fs::path& dir, const std::string& tag) {
    return {
        "--synth-sequences", "6",  "--synth-frames",    "40", "--o-frames",      "10",
        "--f-frames",        "5",  "--window-stride",   "5",  "--batch-size",    "4",
        "--n-critic",        "1",  "--encoder-channels", "6", "--tcn-channels",  "6",
        "--hidden",          "12", "--critic-hidden",   "12", "--refine-channels", "6",
        "--horizons-ms",     "80,160",
        "--checkpoint",      (dir / (tag + ".ckpt")).string(),
        "--report",          (dir / (tag + ".rep")).string(),
    };
}

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
}

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("train with zero epochs emits a loadable initialization bundle") {
    auto dir = fresh_dir("noop");
    auto tag = dir / "noop.ckpt";
    CHECK(run_cli(with({"train"}, with(tiny_flags(dir, "noop"), {"--epochs-sln", "0", "--epochs-dln", "0"}))) == 0);

    auto bundle = cli::CheckpointBundle::load(tag);
    auto pipeline = train::pipeline_from_bundle(bundle);
    CHECK(pipeline.skeleton.joint_count() == 12);
    CHECK(pipeline.cfg.o_frames == 10);
    CHECK(pipeline.has_refiner);  // ranking ran even though nothing trained
    CHECK(pipeline.map.m == 3);   // ceil(12/4)
    CHECK(fs::exists(dir / "noop.rep.curve.csv"));
    CHECK(fs::exists(dir / "noop.rep.refine.csv"));
}

TEST_CASE("same seed and config give byte-identical checkpoints") {
    auto dir = fresh_dir("determinism");
    // The checkpoint path is part of the config snapshot, so reruns must
    // write to the same path; bytes are captured between runs.
    auto run_with = [&](const std::string& seed) {
        auto args = with({"train"}, with(tiny_flags(dir, "same"),
                                         {"--epochs-sln", "1", "--epochs-dln", "1", "--seed", seed}));
        REQUIRE(run_cli(args) == 0);
        return file_bytes(dir / "same.ckpt");
    };

    auto a = run_with("9");
    auto b = run_with("9");
    auto c = run_with("10");
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("HVIS_SEED overrides the seed flag") {
    auto dir = fresh_dir("envseed");
    auto train_to = [&](const std::string& seed) {
        auto args = with({"train"}, with(tiny_flags(dir, "env"),
                                         {"--epochs-sln", "0", "--epochs-dln", "0", "--seed", seed}));
        REQUIRE(run_cli(args) == 0);
        return file_bytes(dir / "env.ckpt");
    };

    auto direct = train_to("3");
    setenv("HVIS_SEED", "3", 1);
    auto via_env = train_to("5");
    unsetenv("HVIS_SEED");
    auto plain5 = train_to("5");

    CHECK(via_env == direct);
    CHECK(via_env != plain5);
}

TEST_CASE("refine stage never touches stage-one parameters") {
    auto dir = fresh_dir("frozen");
    auto train_tag = [&](const std::string& tag, const std::string& dln_epochs) {
        auto args = with({"train"}, with(tiny_flags(dir, tag),
                                         {"--epochs-sln", "1", "--epochs-dln", dln_epochs}));
        REQUIRE(run_cli(args) == 0);
        return cli::CheckpointBundle::load(dir / (tag + ".ckpt"));
    };
    auto none = train_tag("none", "0");
    auto some = train_tag("some", "2");
    REQUIRE(none.tensors.size() == some.tensors.size());
    bool any_refiner_diff = false;
    for (std::size_t i = 0; i < none.tensors.size(); ++i) {
        const auto& name = none.tensors[i].first;
        REQUIRE(name == some.tensors[i].first);
        if (name.rfind("refiner.", 0) == 0) {
            if (none.tensors[i].second->values != some.tensors[i].second->values) any_refiner_diff = true;
        } else {
            CHECK(none.tensors[i].second->values == some.tensors[i].second->values);
        }
    }
    CHECK(any_refiner_diff);  // training did move the refiner
}

TEST_CASE("predict with a zeroed velocity head repeats the last frame") {
    auto dir = fresh_dir("zerovel");
    // no-dln so fusion cannot disturb the reduction
    auto args = with({"train"}, with(tiny_flags(dir, "zv"), {"--epochs-sln", "0", "--epochs-dln", "0",
                                                             "--variant", "no-dln"}));
    REQUIRE(run_cli(args) == 0);

    auto bundle = cli::CheckpointBundle::load(dir / "zv.ckpt");
    for (auto& [name, t] : bundle.tensors) {
        if (name == "generator.w_out" || name == "generator.b_out") {
            std::fill(t->values.begin(), t->values.end(), 0.0);
        }
    }
    bundle.save(dir / "zv0.ckpt");

    auto skeleton = data::synthetic_skeleton();
    // Root at the origin keeps the aligned and written coordinates equal,
    // so the repeat is bitwise exact.
    auto input = data::root_aligned(data::synth_corpus(skeleton, 1, 12, 77)[0], skeleton.root());
    data::save_csv(dir / "obs.csv", input, skeleton);

    auto out = (dir / "pred.csv").string();
    REQUIRE(run_cli({"predict", "--checkpoint-in", (dir / "zv0.ckpt").string(), "--input",
                     (dir / "obs.csv").string(), "--output", out}) == 0);

    std::vector<int> flags;
    auto seq = data::load_csv(out, skeleton, &flags);
    REQUIRE(seq.frames() == 12 + 5);  // F == 5 predicted frames appended
    int n_pred = 0;
    for (int f : flags) n_pred += f;
    CHECK(n_pred == 5);
    for (int f = 12; f < seq.frames(); ++f) {
        CHECK(flags[static_cast<std::size_t>(f)] == 1);
        for (int j = 0; j < 12; ++j) {
            for (int c = 0; c < 3; ++c) {
                CHECK(seq.at(f, j, c) == seq.at(11, j, c));  // exact repeat
            }
        }
    }
}

TEST_CASE("predict rejects inputs shorter than the observation span") {
    auto dir = fresh_dir("short");
    auto args = with({"train"}, with(tiny_flags(dir, "s"), {"--epochs-sln", "0", "--epochs-dln", "0"}));
    REQUIRE(run_cli(args) == 0);

    auto skeleton = data::synthetic_skeleton();
    auto corpus = data::synth_corpus(skeleton, 1, 9, 5);  // 9 < O = 10
    data::save_csv(dir / "short.csv", corpus[0], skeleton);
    CHECK(run_cli({"predict", "--checkpoint-in", (dir / "s.ckpt").string(), "--input",
                   (dir / "short.csv").string(), "--output", (dir / "out.csv").string()}) == 3);
    CHECK_FALSE(fs::exists(dir / "out.csv"));
}

TEST_CASE("eval report has one row per horizon and predictor") {
    auto dir = fresh_dir("evalrows");
    auto args = with({"train"}, with(tiny_flags(dir, "e"), {"--epochs-sln", "0", "--epochs-dln", "0"}));
    REQUIRE(run_cli(args) == 0);

    REQUIRE(run_cli({"eval", "--checkpoint-in", (dir / "e.ckpt").string(), "--report",
                     (dir / "er").string()}) == 0);
    auto rows = csv_rows(dir / "er.eval.csv");
    REQUIRE(rows.size() == 1 + 2 * 3);  // header + horizons x predictors
    CHECK(rows[0] == std::vector<std::string>{"predictor", "horizon_ms", "horizon_frame", "mpjpe_mm"});
    CHECK(rows[1][0] == "zero-velocity");
    CHECK(rows[2][0] == "base");
    CHECK(rows[3][0] == "refined");
    CHECK(rows[1][1] == "80");
    CHECK(rows[4][1] == "160");
}

TEST_CASE("evaluating the ground truth as predictor yields zeros") {
    auto dir = fresh_dir("oracle");
    auto args = with({"train"}, with(tiny_flags(dir, "o"), {"--epochs-sln", "0", "--epochs-dln", "0"}));
    REQUIRE(run_cli(args) == 0);

    auto skeleton = data::synthetic_skeleton();
    auto corpus = data::synth_corpus(skeleton, 1, 15, 21);
    const auto& seq = corpus[0];

    // Pose the true last 5 frames as the "prediction".
    std::vector<int> flags(15, 0);
    for (int f = 10; f < 15; ++f) flags[static_cast<std::size_t>(f)] = 1;
    data::save_csv(dir / "pred.csv", seq, skeleton, &flags);
    data::save_csv(dir / "truth.csv", seq, skeleton);

    REQUIRE(run_cli({"eval", "--checkpoint-in", (dir / "o.ckpt").string(), "--pred-csv",
                     (dir / "pred.csv").string(), "--truth-csv", (dir / "truth.csv").string(),
                     "--report", (dir / "or").string()}) == 0);
    auto rows = csv_rows(dir / "or.eval.csv");
    REQUIRE(rows.size() == 1 + 2);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        CHECK(rows[r][0] == "file");
        CHECK(std::stod(rows[r][3]) == 0.0);
    }
}

TEST_CASE("predicted CSV scored by eval matches the library error to 1e-9") {
    auto dir = fresh_dir("crosspath");
    auto args = with({"train"}, with(tiny_flags(dir, "x"), {"--epochs-sln", "1", "--epochs-dln", "1"}));
    REQUIRE(run_cli(args) == 0);

    auto skeleton = data::synthetic_skeleton();
    auto corpus = data::synth_corpus(skeleton, 1, 15, 31);  // O + F frames exactly
    const auto& seq = corpus[0];

    // Observed CSV: the first O frames only.
    auto obs = data::make_sequence(10, 12, seq.fps, "obs");
    for (int f = 0; f < 10; ++f)
        for (int j = 0; j < 12; ++j)
            for (int c = 0; c < 3; ++c) obs.at(f, j, c) = seq.at(f, j, c);
    data::save_csv(dir / "obs.csv", obs, skeleton);
    data::save_csv(dir / "truth.csv", seq, skeleton);  // last 5 frames are the future

    REQUIRE(run_cli({"predict", "--checkpoint-in", (dir / "x.ckpt").string(), "--input",
                     (dir / "obs.csv").string(), "--output", (dir / "pred.csv").string()}) == 0);
    REQUIRE(run_cli({"eval", "--checkpoint-in", (dir / "x.ckpt").string(), "--pred-csv",
                     (dir / "pred.csv").string(), "--truth-csv", (dir / "truth.csv").string(),
                     "--report", (dir / "xr").string()}) == 0);

    // Library path: the same window, scored directly.
    auto pipeline = train::pipeline_from_bundle(cli::CheckpointBundle::load(dir / "x.ckpt"));
    auto windows = data::make_windows(seq, 10, 5, 1, skeleton.root());
    REQUIRE(windows.size() == 1);
    auto pred = train::prediction_frames(pipeline.predict_final(windows[0]));

    auto rows = csv_rows(dir / "xr.eval.csv");
    REQUIRE(rows.size() == 1 + 2);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const int frame = std::stoi(rows[r][2]);
        const double via_files = std::stod(rows[r][3]);
        const double via_library = data::mpjpe_mm(pred, windows[0].future, {frame - 1});
        CHECK(std::abs(via_files - via_library) < 1e-9);
    }
}

TEST_CASE("train then eval work against a CSV corpus directory") {
    auto dir = fresh_dir("csvdir");
    REQUIRE(run_cli({"synth", "--out", (dir / "corpus").string(), "--synth-sequences", "4",
                     "--synth-frames", "30", "--seed", "11"}) == 0);
    CHECK(fs::exists(dir / "corpus" / "skeleton.txt"));
    CHECK(fs::exists(dir / "corpus" / "seq_0003.csv"));

    auto args = with({"train"}, with(tiny_flags(dir, "d"),
                                     {"--epochs-sln", "0", "--epochs-dln", "0", "--corpus",
                                      (dir / "corpus").string(), "--synth-frames", "30"}));
    REQUIRE(run_cli(args) == 0);
    auto bundle = cli::CheckpointBundle::load(dir / "d.ckpt");
    auto corpus = data::synth_corpus(data::synthetic_skeleton(), 4, 30, 11);
    CHECK(bundle.corpus_hash == data::corpus_fingerprint(corpus));
}

TEST_CASE("skeleton joint-count mismatch is a contract error") {
    auto dir = fresh_dir("mismatch");
    auto args = with({"train"}, with(tiny_flags(dir, "m"), {"--epochs-sln", "0", "--epochs-dln", "0"}));
    REQUIRE(run_cli(args) == 0);

    std::ofstream sk(dir / "tiny.txt");
    sk << "root -1 0\nlimb 0 1\n";
    sk.close();
    CHECK(run_cli({"eval", "--checkpoint-in", (dir / "m.ckpt").string(), "--skeleton",
                   (dir / "tiny.txt").string(), "--report", (dir / "mr").string()}) == 3);
}

TEST_CASE("parameter problems exit with code 2") {
    auto dir = fresh_dir("badparam");
    CHECK(run_cli(with({"train"}, with(tiny_flags(dir, "p"), {"--o-frames", "0"}))) == 2);
    CHECK(run_cli(with({"train"}, with(tiny_flags(dir, "p"), {"--no-such-flag", "1"}))) == 2);
    CHECK(run_cli({"eval", "--report", "r"}) == 2);  // missing required checkpoint
    CHECK(run_cli({"ablate", "--variants", "bogus"}) == 2);
    CHECK(run_cli({}) == 2);  // no subcommand
    CHECK(run_cli({"train", "--horizons-ms", "80", "--f-frames", "1"}) == 2);  // frame 2 > F
}

TEST_CASE("unreadable checkpoints exit with code 3") {
    auto dir = fresh_dir("badckpt");
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "not a checkpoint";
    bad.close();
    CHECK(run_cli({"eval", "--checkpoint-in", (dir / "bad.ckpt").string()}) == 3);
    CHECK(run_cli({"predict", "--checkpoint-in", (dir / "none.ckpt").string(), "--input", "x.csv",
                   "--output", "y.csv"}) == 3);
}

TEST_CASE("divergence exits with code 4 and leaves diagnostics") {
    auto dir = fresh_dir("diverge");
    auto args = with({"train"}, with(tiny_flags(dir, "v"),
                                     {"--epochs-sln", "4", "--epochs-dln", "0",
                                      "--learning-rate", "1e14", "--lambda-j", "1e6"}));
    CHECK(run_cli(args) == 4);
    CHECK(fs::exists(dir / "v.rep.diagnostics.txt"));
}

TEST_CASE("ablation rows share one split hash and cover every variant") {
    auto dir = fresh_dir("ablate");
    auto args = with({"ablate"}, with(tiny_flags(dir, "a"),
                                      {"--epochs-sln", "1", "--epochs-dln", "1", "--variants",
                                       "no-dln,no-trn"}));
    REQUIRE(run_cli(args) == 0);
    auto rows = csv_rows(dir / "a.rep.ablation.csv");
    REQUIRE(rows.size() == 1 + 3 * 2);  // header + variants x horizons
    CHECK(rows[1][0] == "full");
    CHECK(rows[3][0] == "no-dln");
    CHECK(rows[5][0] == "no-trn");
    const auto& hash = rows[1][5];
    for (std::size_t r = 2; r < rows.size(); ++r) CHECK(rows[r][5] == hash);
}
