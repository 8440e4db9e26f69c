#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hvis/motion.hpp"
#include "hvis/skeleton.hpp"
#include "hvis/synth.hpp"

using namespace hvis::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "hvis_motion_tests";
    fs::create_directories(dir);
    return dir;
}

SkeletonSpec two_joint_chain() {
    SkeletonSpec s;
    s.names = {"a", "b"};
    s.parents = {-1, 0};
    s.part_of = {0, 1};
    return s;
}

}  // namespace

TEST_CASE("skeleton validation catches structural defects") {
    auto good = synthetic_skeleton();
    CHECK_NOTHROW(good.validate());
    CHECK(good.joint_count() == 12);
    CHECK(good.root() == 0);
    for (int part = 0; part < kPartCount; ++part) CHECK(!good.joints_in_part(part).empty());

    auto two_roots = good;
    two_roots.parents[5] = -1;
    CHECK_THROWS_AS(two_roots.validate(), hvis::DataError);

    auto cycle = good;
    cycle.parents[1] = 3;  // 1 -> 3 -> 2 -> 1
    CHECK_THROWS_AS(cycle.validate(), hvis::DataError);

    auto bad_part = good;
    bad_part.part_of[4] = 7;
    CHECK_THROWS_AS(bad_part.validate(), hvis::DataError);

    auto dup = good;
    dup.names[3] = "root";
    CHECK_THROWS_AS(dup.validate(), hvis::DataError);
}

TEST_CASE("skeleton text round-trip preserves every joint") {
    auto s = synthetic_skeleton();
    auto path = temp_dir() / "skel.txt";
    s.save(path);
    auto back = SkeletonSpec::load(path);
    CHECK(back.names == s.names);
    CHECK(back.parents == s.parents);
    CHECK(back.part_of == s.part_of);
}

TEST_CASE("load_csv reads a zeros file with the declared rate") {
    SkeletonSpec s;
    s.names = {"j"};
    s.parents = {-1};
    s.part_of = {0};
    auto path = temp_dir() / "zeros.csv";
    std::ofstream out(path);
    out << "# fps=25\nframe,j_x,j_y,j_z\n0,0,0,0\n1,0,0,0\n";
    out.close();
    auto seq = load_csv(path, s);
    CHECK(seq.frames() == 2);
    CHECK(seq.joints() == 1);
    CHECK(seq.fps == 25.0);
    for (double v : seq.positions->values) CHECK(v == 0.0);
}

TEST_CASE("load_csv reports the expected and actual column counts") {
    SkeletonSpec s = two_joint_chain();
    auto path = temp_dir() / "badcols.csv";
    std::ofstream out(path);
    out << "frame,a_x,a_y,a_z,b_x,b_y,b_z\n0,1,2,3,4,5\n";
    out.close();
    try {
        load_csv(path, s);
        CHECK(false);
    } catch (const hvis::FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("7") != std::string::npos);
        CHECK(msg.find("6") != std::string::npos);
    }
}

TEST_CASE("load_csv names the row and column of a non-numeric cell") {
    SkeletonSpec s = two_joint_chain();
    auto path = temp_dir() / "badcell.csv";
    std::ofstream out(path);
    out << "frame,a_x,a_y,a_z,b_x,b_y,b_z\n0,1,2,3,4,5,6\n1,1,oops,3,4,5,6\n";
    out.close();
    try {
        load_csv(path, s);
        CHECK(false);
    } catch (const hvis::FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
        CHECK(msg.find("column 3") != std::string::npos);
        CHECK(msg.find("oops") != std::string::npos);
    }
}

TEST_CASE("csv save/load round-trip preserves positions to 1e-9") {
    auto skel = synthetic_skeleton();
    auto corpus = synth_corpus(skel, 1, 40, 99);
    auto path = temp_dir() / "roundtrip.csv";
    save_csv(path, corpus[0], skel);
    auto back = load_csv(path, skel);
    REQUIRE(back.frames() == corpus[0].frames());
    CHECK(back.fps == corpus[0].fps);
    for (int i = 0; i < back.positions->numel(); ++i) {
        CHECK(std::fabs(back.positions->values[i] - corpus[0].positions->values[i]) < 1e-9);
    }
}

TEST_CASE("downsample keeps every stride-th frame and relabels the rate") {
    auto seq = make_sequence(10, 1, 50.0);
    for (int f = 0; f < 10; ++f) seq.at(f, 0, 0) = f;
    auto half = downsample(seq, 25.0);
    CHECK(half.frames() == 5);
    CHECK(half.fps == 25.0);
    for (int f = 0; f < 5; ++f) CHECK(half.at(f, 0, 0) == 2.0 * f);

    auto same = downsample(seq, 50.0);
    CHECK(same.frames() == 10);

    auto relabeled = downsample(make_sequence(10, 1, 30.0), 25.0);
    CHECK(relabeled.frames() == 10);  // round(30/25) = 1
    CHECK(relabeled.fps == 25.0);

    CHECK_THROWS_AS(downsample(seq, 60.0), hvis::ParameterError);
}

TEST_CASE("root_aligned zeroes the root in every frame and is idempotent") {
    auto skel = synthetic_skeleton();
    auto corpus = synth_corpus(skel, 1, 30, 5);
    auto seq = corpus[0];
    for (int f = 0; f < seq.frames(); ++f) seq.at(f, 0, 0) += 0.01 * f;  // give the root some motion
    auto aligned = root_aligned(seq, 0);
    for (int f = 0; f < aligned.frames(); ++f)
        for (int c = 0; c < 3; ++c) CHECK(aligned.at(f, 0, c) == 0.0);
    auto again = root_aligned(aligned, 0);
    CHECK(again.positions->values == aligned.positions->values);
}

TEST_CASE("make_windows counts, aligns to the last observed root, and rejects short clips") {
    auto skel = synthetic_skeleton();
    const int o = 4, f = 3;

    auto exact = synth_corpus(skel, 1, o + f, 1)[0];
    CHECK(make_windows(exact, o, f, 1, 0).size() == 1);

    auto longer = synth_corpus(skel, 1, o + f + 3, 2)[0];
    auto windows = make_windows(longer, o, f, 1, 0);
    CHECK(windows.size() == 4);

    auto shorter = synth_corpus(skel, 1, o + f - 1, 3)[0];
    CHECK(make_windows(shorter, o, f, 1, 0).empty());

    // Give the root global drift so the alignment actually subtracts something.
    auto drifting = longer;
    for (int fr = 0; fr < drifting.frames(); ++fr)
        for (int j = 0; j < drifting.joints(); ++j) drifting.at(fr, j, 2) += 0.05 * fr;
    for (const auto& w : make_windows(drifting, o, f, 2, 0)) {
        for (int c = 0; c < 3; ++c) CHECK(w.obs(o - 1, 0, c) == 0.0);
        // Continuity: the first future frame sits one source frame after the anchor.
        CHECK(w.fut(0, 0, 2) == doctest::Approx(0.05).epsilon(1e-9));
    }

    CHECK_THROWS_AS(make_windows(longer, 0, f, 1, 0), hvis::ParameterError);
    CHECK_THROWS_AS(make_windows(longer, o, f, 0, 0), hvis::ParameterError);
}

TEST_CASE("zero_velocity_baseline repeats the last observed frame") {
    auto obs = hvis::ad::make_tensor({3, 2, 3});
    for (int i = 0; i < obs->numel(); ++i) obs->values[i] = i * 0.1;
    auto base = zero_velocity_baseline(obs, 4);
    CHECK(base->shape == hvis::ad::Shape{4, 2, 3});
    for (int f = 0; f < 4; ++f)
        for (int j = 0; j < 2; ++j)
            for (int c = 0; c < 3; ++c)
                CHECK(base->values[(static_cast<std::size_t>(f) * 2 + j) * 3 + c] ==
                      obs->values[(static_cast<std::size_t>(2) * 2 + j) * 3 + c]);
}

TEST_CASE("mpjpe is zero on identical inputs and 1mm on a 1mm offset") {
    auto truth = hvis::ad::make_tensor({2, 3, 3});
    for (int i = 0; i < truth->numel(); ++i) truth->values[i] = 0.01 * i;
    CHECK(mpjpe_mm(truth, truth) == 0.0);

    auto shifted = hvis::ad::make_tensor(truth->shape, truth->values);
    for (int f = 0; f < 2; ++f)
        for (int j = 0; j < 3; ++j) shifted->values[(static_cast<std::size_t>(f) * 3 + j) * 3 + 0] += 0.001;
    CHECK(mpjpe_mm(shifted, truth) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mpjpe matches a direct loop on a small instance") {
    hvis::ad::Rng rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto pred = hvis::ad::make_tensor({2, 2, 3});
    auto truth = hvis::ad::make_tensor({2, 2, 3});
    for (int i = 0; i < pred->numel(); ++i) {
        pred->values[i] = uni(rng);
        truth->values[i] = uni(rng);
    }
    double acc = 0.0;
    for (int f = 0; f < 2; ++f)
        for (int j = 0; j < 2; ++j) {
            double ss = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = pred->values[(f * 2 + j) * 3 + c] - truth->values[(f * 2 + j) * 3 + c];
                ss += d * d;
            }
            acc += std::sqrt(ss);
        }
    const double expected = 1000.0 * acc / 4.0;
    CHECK(mpjpe_mm(pred, truth) == doctest::Approx(expected).epsilon(1e-12));

    // Invariance under a common translation; defined frame subsets only.
    auto pred_shift = hvis::ad::make_tensor(pred->shape, pred->values);
    auto truth_shift = hvis::ad::make_tensor(truth->shape, truth->values);
    for (int i = 0; i < pred->numel(); i += 3) {
        pred_shift->values[i] += 2.5;
        truth_shift->values[i] += 2.5;
    }
    CHECK(mpjpe_mm(pred_shift, truth_shift) == doctest::Approx(mpjpe_mm(pred, truth)).epsilon(1e-12));

    auto bad = hvis::ad::make_tensor({2, 3, 3});
    CHECK_THROWS_AS(mpjpe_mm(pred, bad), hvis::DimensionError);
    CHECK_THROWS_AS(mpjpe_mm(pred, truth, {7}), hvis::ParameterError);
}

TEST_CASE("synth corpus is bit-identical for a fixed seed and differs across seeds") {
    auto skel = synthetic_skeleton();
    auto a = synth_corpus(skel, 3, 60, 42);
    auto b = synth_corpus(skel, 3, 60, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].positions->numel() == b[i].positions->numel());
        CHECK(std::memcmp(a[i].positions->values.data(), b[i].positions->values.data(),
                          a[i].positions->values.size() * sizeof(double)) == 0);
    }
    CHECK(corpus_fingerprint(a) == corpus_fingerprint(b));
    auto c = synth_corpus(skel, 3, 60, 43);
    CHECK(corpus_fingerprint(a) != corpus_fingerprint(c));
}

TEST_CASE("synth trunk joints never move") {
    auto skel = synthetic_skeleton();
    for (const auto& seq : synth_corpus(skel, 2, 80, 7)) {
        for (int j : skel.joints_in_part(0)) {
            for (int f = 1; f < seq.frames(); ++f)
                for (int c = 0; c < 3; ++c) CHECK(seq.at(f, j, c) == seq.at(0, j, c));
        }
    }
}

TEST_CASE("hard joints have larger zero-velocity error than sinusoidal joints at the far horizon") {
    auto skel = synthetic_skeleton();
    const auto hard = synthetic_hard_joints(skel);
    CHECK(hard.size() == 3);  // ceil(12/4)
    std::vector<bool> is_hard(skel.joint_count(), false);
    for (int j : hard) is_hard[j] = true;

    const int o = 25, f = 25;
    auto corpus = synth_corpus(skel, 30, 2 * (o + f), 11);
    double hard_err = 0.0, sin_err = 0.0;
    int hard_n = 0, sin_n = 0;
    for (const auto& seq : corpus) {
        for (const auto& w : make_windows(seq, o, f, 25, skel.root())) {
            auto base = zero_velocity_baseline(w.observed, f);
            for (int j = 0; j < skel.joint_count(); ++j) {
                if (skel.part_of[j] == 0) continue;
                double dx = 0;
                for (int c = 0; c < 3; ++c) {
                    const double d = base->values[((f - 1) * skel.joint_count() + j) * 3 + c] - w.fut(f - 1, j, c);
                    dx += d * d;
                }
                const double err = std::sqrt(dx);
                if (is_hard[j]) {
                    hard_err += err;
                    ++hard_n;
                } else {
                    sin_err += err;
                    ++sin_n;
                }
            }
        }
    }
    CHECK(hard_err / hard_n > sin_err / sin_n);
}

TEST_CASE("baseline error grows with horizon over the first quarter period") {
    auto skel = synthetic_skeleton();
    const int o = 25, f = 25;
    auto corpus = synth_corpus(skel, 30, 2 * (o + f), 13);
    std::vector<bool> is_hard(skel.joint_count(), false);
    for (int j : synthetic_hard_joints(skel)) is_hard[j] = true;

    // Mean error of the repeated-last-frame prediction per future index,
    // sinusoidal limb joints only. Fastest swing is 4 rad/s, so the first
    // quarter period covers horizons up to ~9 frames at 25 fps.
    std::vector<double> err(9, 0.0);
    int windows = 0;
    for (const auto& seq : corpus) {
        for (const auto& w : make_windows(seq, o, f, 25, skel.root())) {
            ++windows;
            auto base = zero_velocity_baseline(w.observed, f);
            for (int h = 0; h < 9; ++h) {
                double acc = 0.0;
                int cnt = 0;
                for (int j = 0; j < skel.joint_count(); ++j) {
                    if (skel.part_of[j] == 0 || is_hard[j]) continue;
                    double dd = 0;
                    for (int c = 0; c < 3; ++c) {
                        const double d = base->values[(static_cast<std::size_t>(h) * skel.joint_count() + j) * 3 + c] -
                                         w.fut(h, j, c);
                        dd += d * d;
                    }
                    acc += std::sqrt(dd);
                    ++cnt;
                }
                err[h] += acc / cnt;
            }
        }
    }
    for (int h = 1; h < 9; ++h) CHECK(err[h] >= err[h - 1]);
    CHECK(windows > 50);
}
