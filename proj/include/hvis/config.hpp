#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hvis::cli {

// Every knob of the two training stages plus data and output paths. The
// numeric defaults are the published operating point; tests assert on them,
// so changing a default is an interface change.
struct TrainConfig {
    int o_frames = 25;
    int f_frames = 25;
    double fps = 25.0;
    double learning_rate = 0.001;
    int n_critic = 5;
    int batch_size = 32;
    int epochs_sln = 200;
    int epochs_dln = 200;
    double clip_c = 0.01;
    int m_joints = 0;  // 0 means derive from m_fraction
    double m_fraction = 0.25;
    unsigned long long seed = 1;
    std::vector<int> horizons_ms = {80, 160, 320, 400, 1000};
    double lambda_j = 1.0;
    double val_fraction = 0.2;
    int window_stride = 10;
    int synth_sequences = 200;
    int synth_frames = 100;
    int encoder_channels = 64;
    int tcn_channels = 64;
    int hidden = 256;
    int critic_hidden = 256;
    int refine_channels = 64;
    int val_probe_windows = 32;  // windows sampled for the per-epoch curve
    std::string variant = "full";  // full | no-hvm | no-trn | no-dln
    std::string corpus_path;       // empty -> generated corpus
    std::string skeleton_path;     // empty -> bundled skeleton
    std::string checkpoint_path = "hvis.ckpt";
    std::string report_path = "report";

    void validate() const;

    // Milliseconds to a whole frame count at the configured rate.
    int horizon_frame(int ms) const;

    // Hard-joint count for an N-joint skeleton.
    int resolve_m(int n_joints) const;

    // Canonical key=value text; from_text(to_text()) is the identity.
    std::string to_text() const;
    static TrainConfig from_text(const std::string& text);
    static TrainConfig from_file(const std::filesystem::path& path);

    // Applies one kebab-case key. Unknown keys and unparsable values throw.
    void set_key(const std::string& key, const std::string& value);

    // Every kebab-case key set_key accepts, in canonical order.
    static const std::vector<std::string>& keys();

    // HVIS_SEED, when set, wins over file and flag values.
    void apply_env();
};

}  // namespace hvis::cli
