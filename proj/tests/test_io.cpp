#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hvis/checkpoint.hpp"
#include "hvis/config.hpp"
#include "hvis/errors.hpp"

using namespace hvis;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "hvis_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

cli::CheckpointBundle sample_bundle() {
    cli::CheckpointBundle b;
    b.config_text = cli::TrainConfig{}.to_text();
    b.skeleton_text = "root -1 0\nhead 0 0\n";
    b.map_text = "";
    b.corpus_hash = 0xfeedfacecafebeefull;
    b.tensors.emplace_back("a.w", ad::make_tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6.5}));
    b.tensors.emplace_back("a.b", ad::make_tensor({3}, std::vector<double>{-0.25, 0, 9}));
    b.tensors.emplace_back("b.k", ad::make_tensor({2, 2, 2}, 0.125));
    return b;
}

}  // namespace

TEST_CASE("config defaults match the published operating point") {
    cli::TrainConfig cfg;
    CHECK(cfg.o_frames == 25);
    CHECK(cfg.f_frames == 25);
    CHECK(cfg.fps == 25.0);
    CHECK(cfg.learning_rate == 0.001);
    CHECK(cfg.n_critic == 5);
    CHECK(cfg.clip_c == 0.01);
    CHECK(cfg.m_fraction == 0.25);
    CHECK(cfg.hidden == 256);
    CHECK(cfg.critic_hidden == 256);
    CHECK(cfg.encoder_channels == 64);
    CHECK(cfg.tcn_channels == 64);
    CHECK(cfg.refine_channels == 64);
    CHECK(cfg.lambda_j == 1.0);
    CHECK(cfg.horizons_ms == std::vector<int>{80, 160, 320, 400, 1000});
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("horizon conversion rounds milliseconds to frames") {
    cli::TrainConfig cfg;
    CHECK(cfg.horizon_frame(80) == 2);
    CHECK(cfg.horizon_frame(160) == 4);
    CHECK(cfg.horizon_frame(320) == 8);
    CHECK(cfg.horizon_frame(400) == 10);
    CHECK(cfg.horizon_frame(1000) == 25);
    cfg.fps = 50;
    CHECK(cfg.horizon_frame(80) == 4);
    CHECK(cfg.horizon_frame(30) == 2);  // 1.5 frames rounds up
}

TEST_CASE("hard-joint count derives from the fraction unless pinned") {
    cli::TrainConfig cfg;
    CHECK(cfg.resolve_m(12) == 3);
    CHECK(cfg.resolve_m(13) == 4);  // ceil
    CHECK(cfg.resolve_m(1) == 1);
    cfg.m_joints = 5;
    CHECK(cfg.resolve_m(12) == 5);
    CHECK(cfg.resolve_m(4) == 4);  // clamped to the joint count
    CHECK_THROWS_AS(cfg.resolve_m(0), ParameterError);
}

TEST_CASE("config text round-trips every field") {
    cli::TrainConfig cfg;
    cfg.o_frames = 7;
    cfg.f_frames = 3;
    cfg.fps = 12.5;
    cfg.learning_rate = 0.025;
    cfg.horizons_ms = {80, 240};
    cfg.seed = 987654321;
    cfg.m_joints = 2;
    cfg.variant = "no-trn";
    cfg.corpus_path = "data/corpus";
    cfg.report_path = "out/rep";

    auto copy = cli::TrainConfig::from_text(cfg.to_text());
    CHECK(copy.to_text() == cfg.to_text());
    CHECK(copy.o_frames == 7);
    CHECK(copy.fps == 12.5);
    CHECK(copy.horizons_ms == std::vector<int>{80, 240});
    CHECK(copy.seed == 987654321);
    CHECK(copy.variant == "no-trn");
    CHECK(copy.corpus_path == "data/corpus");
}

TEST_CASE("config parsing reports the offending key or line") {
    cli::TrainConfig cfg;
    CHECK_THROWS_WITH_AS(cfg.set_key("no-such-key", "1"),
                         doctest::Contains("no-such-key"), ParameterError);
    CHECK_THROWS_WITH_AS(cfg.set_key("batch-size", "many"),
                         doctest::Contains("batch-size"), ParameterError);
    CHECK_THROWS_WITH_AS(cfg.set_key("fps", "25x"), doctest::Contains("fps"), ParameterError);
    CHECK_THROWS_AS(cfg.set_key("horizons-ms", "80,,160"), ParameterError);
    CHECK_THROWS_WITH_AS(cli::TrainConfig::from_text("o-frames = 5\nbogus line\n"),
                         doctest::Contains("line 2"), ParameterError);
    CHECK_NOTHROW(cli::TrainConfig::from_text("# comment\n\no-frames = 5\n"));
}

TEST_CASE("config validation rejects out-of-range values") {
    cli::TrainConfig cfg;
    cfg.o_frames = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);

    cfg = {};
    cfg.val_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);

    cfg = {};
    cfg.variant = "bogus";
    CHECK_THROWS_AS(cfg.validate(), ParameterError);

    cfg = {};
    cfg.horizons_ms = {10};  // frame 0
    CHECK_THROWS_AS(cfg.validate(), ParameterError);

    cfg = {};
    cfg.horizons_ms = {2000};  // frame 50 > F
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("2000"), ParameterError);
}

TEST_CASE("HVIS_SEED wins over the configured seed") {
    cli::TrainConfig cfg;
    cfg.seed = 5;
    unsetenv("HVIS_SEED");
    cfg.apply_env();
    CHECK(cfg.seed == 5);

    setenv("HVIS_SEED", "42", 1);
    cfg.apply_env();
    CHECK(cfg.seed == 42);

    setenv("HVIS_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(cfg.apply_env(), ParameterError);
    unsetenv("HVIS_SEED");
}

TEST_CASE("checkpoint bytes round-trip exactly") {
    auto bundle = sample_bundle();
    auto bytes = bundle.to_bytes();
    auto copy = cli::CheckpointBundle::from_bytes(bytes);
    CHECK(copy.config_text == bundle.config_text);
    CHECK(copy.skeleton_text == bundle.skeleton_text);
    CHECK(copy.map_text == bundle.map_text);
    CHECK(copy.corpus_hash == bundle.corpus_hash);
    REQUIRE(copy.tensors.size() == bundle.tensors.size());
    for (std::size_t i = 0; i < copy.tensors.size(); ++i) {
        CHECK(copy.tensors[i].first == bundle.tensors[i].first);
        CHECK(copy.tensors[i].second->shape == bundle.tensors[i].second->shape);
        CHECK(copy.tensors[i].second->values == bundle.tensors[i].second->values);
    }
    CHECK(copy.to_bytes() == bytes);
}

TEST_CASE("checkpoint file save then load reproduces the file byte for byte") {
    auto bundle = sample_bundle();
    auto p1 = temp_file("roundtrip1.ckpt");
    auto p2 = temp_file("roundtrip2.ckpt");
    bundle.save(p1);
    cli::CheckpointBundle::load(p1).save(p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("checkpoint loader rejects malformed streams") {
    auto bytes = sample_bundle().to_bytes();

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_WITH_AS(cli::CheckpointBundle::from_bytes(bad_magic),
                         doctest::Contains("magic"), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_WITH_AS(cli::CheckpointBundle::from_bytes(bad_version),
                         doctest::Contains("version 2"), FormatError);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_WITH_AS(cli::CheckpointBundle::from_bytes(truncated),
                         doctest::Contains("truncated"), FormatError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_WITH_AS(cli::CheckpointBundle::from_bytes(trailing),
                         doctest::Contains("trailing"), FormatError);
}

TEST_CASE("checkpoint loader cross-checks tensor layout fields") {
    // Single scalar tensor last: its 8-byte value sits at the end, the
    // 8-byte count right before it, the kind byte 9 before the count.
    cli::CheckpointBundle b;
    b.corpus_hash = 1;
    b.tensors.emplace_back("t", ad::make_tensor({1}, std::vector<double>{3.5}));
    auto bytes = b.to_bytes();

    auto bad_count = bytes;
    bad_count[bytes.size() - 16] = 9;
    CHECK_THROWS_WITH_AS(cli::CheckpointBundle::from_bytes(bad_count),
                         doctest::Contains("count"), FormatError);

    auto bad_kind = bytes;
    bad_kind[bytes.size() - 25] = 7;
    CHECK_THROWS_WITH_AS(cli::CheckpointBundle::from_bytes(bad_kind),
                         doctest::Contains("kind"), FormatError);
}

TEST_CASE("bundle tensor lookup by name") {
    auto bundle = sample_bundle();
    CHECK(bundle.tensor("a.b")->values[2] == 9);
    CHECK_THROWS_WITH_AS(bundle.tensor("missing"), doctest::Contains("missing"), ContractError);
}
