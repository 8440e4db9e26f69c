#include "hvis/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hvis/errors.hpp"

namespace hvis::cli {

namespace {

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config key '" + key + "': expected integer, got '" + value + "'");
    }
}

double parse_num(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config key '" + key + "': expected number, got '" + value + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ParameterError("config key '" + key + "': empty list entry");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) throw ParameterError("config key '" + key + "': empty list");
    return out;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterError("config: " + what);
}

}  // namespace

void TrainConfig::validate() const {
    require(o_frames > 0, "o-frames must be positive");
    require(f_frames > 0, "f-frames must be positive");
    require(fps > 0, "fps must be positive");
    require(learning_rate > 0, "learning-rate must be positive");
    require(n_critic > 0, "n-critic must be positive");
    require(batch_size > 0, "batch-size must be positive");
    require(epochs_sln >= 0, "epochs-sln must be non-negative");
    require(epochs_dln >= 0, "epochs-dln must be non-negative");
    require(clip_c > 0, "clip-c must be positive");
    require(m_joints >= 0, "m-joints must be non-negative");
    require(m_fraction > 0 && m_fraction <= 1, "m-fraction must be in (0,1]");
    require(lambda_j >= 0, "lambda-j must be non-negative");
    require(val_fraction > 0 && val_fraction < 1, "val-fraction must be in (0,1)");
    require(window_stride > 0, "window-stride must be positive");
    require(synth_sequences > 0, "synth-sequences must be positive");
    require(synth_frames > 0, "synth-frames must be positive");
    require(encoder_channels > 0, "encoder-channels must be positive");
    require(tcn_channels > 0, "tcn-channels must be positive");
    require(hidden > 0, "hidden must be positive");
    require(critic_hidden > 0, "critic-hidden must be positive");
    require(refine_channels > 0, "refine-channels must be positive");
    require(val_probe_windows > 0, "val-probe-windows must be positive");
    require(variant == "full" || variant == "no-hvm" || variant == "no-trn" ||
                variant == "no-dln",
            "variant must be one of full, no-hvm, no-trn, no-dln");
    require(!horizons_ms.empty(), "horizons-ms must be non-empty");
    for (int ms : horizons_ms) {
        require(ms > 0, "horizon " + std::to_string(ms) + "ms must be positive");
        int frame = horizon_frame(ms);
        require(frame >= 1 && frame <= f_frames,
                "horizon " + std::to_string(ms) + "ms maps to frame " +
                    std::to_string(frame) + ", outside 1.." + std::to_string(f_frames));
    }
}

int TrainConfig::horizon_frame(int ms) const {
    return static_cast<int>(std::llround(ms * fps / 1000.0));
}

int TrainConfig::resolve_m(int n_joints) const {
    if (n_joints <= 0) throw ParameterError("resolve_m: joint count must be positive");
    int m = m_joints > 0 ? m_joints
                         : static_cast<int>(std::ceil(n_joints * m_fraction));
    if (m < 1) m = 1;
    if (m > n_joints) m = n_joints;
    return m;
}

std::string TrainConfig::to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "o-frames = " << o_frames << "\n";
    out << "f-frames = " << f_frames << "\n";
    out << "fps = " << fps << "\n";
    out << "learning-rate = " << learning_rate << "\n";
    out << "n-critic = " << n_critic << "\n";
    out << "batch-size = " << batch_size << "\n";
    out << "epochs-sln = " << epochs_sln << "\n";
    out << "epochs-dln = " << epochs_dln << "\n";
    out << "clip-c = " << clip_c << "\n";
    out << "m-joints = " << m_joints << "\n";
    out << "m-fraction = " << m_fraction << "\n";
    out << "seed = " << seed << "\n";
    out << "horizons-ms = ";
    for (std::size_t i = 0; i < horizons_ms.size(); ++i) {
        if (i) out << ",";
        out << horizons_ms[i];
    }
    out << "\n";
    out << "lambda-j = " << lambda_j << "\n";
    out << "val-fraction = " << val_fraction << "\n";
    out << "window-stride = " << window_stride << "\n";
    out << "synth-sequences = " << synth_sequences << "\n";
    out << "synth-frames = " << synth_frames << "\n";
    out << "encoder-channels = " << encoder_channels << "\n";
    out << "tcn-channels = " << tcn_channels << "\n";
    out << "hidden = " << hidden << "\n";
    out << "critic-hidden = " << critic_hidden << "\n";
    out << "refine-channels = " << refine_channels << "\n";
    out << "val-probe-windows = " << val_probe_windows << "\n";
    out << "variant = " << variant << "\n";
    out << "corpus = " << corpus_path << "\n";
    out << "skeleton = " << skeleton_path << "\n";
    out << "checkpoint = " << checkpoint_path << "\n";
    out << "report = " << report_path << "\n";
    return out.str();
}

void TrainConfig::set_key(const std::string& key, const std::string& value) {
    if (key == "o-frames") o_frames = static_cast<int>(parse_int(key, value));
    else if (key == "f-frames") f_frames = static_cast<int>(parse_int(key, value));
    else if (key == "fps") fps = parse_num(key, value);
    else if (key == "learning-rate") learning_rate = parse_num(key, value);
    else if (key == "n-critic") n_critic = static_cast<int>(parse_int(key, value));
    else if (key == "batch-size") batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "epochs-sln") epochs_sln = static_cast<int>(parse_int(key, value));
    else if (key == "epochs-dln") epochs_dln = static_cast<int>(parse_int(key, value));
    else if (key == "clip-c") clip_c = parse_num(key, value);
    else if (key == "m-joints") m_joints = static_cast<int>(parse_int(key, value));
    else if (key == "m-fraction") m_fraction = parse_num(key, value);
    else if (key == "seed") seed = static_cast<unsigned long long>(parse_int(key, value));
    else if (key == "horizons-ms") horizons_ms = parse_int_list(key, value);
    else if (key == "lambda-j") lambda_j = parse_num(key, value);
    else if (key == "val-fraction") val_fraction = parse_num(key, value);
    else if (key == "window-stride") window_stride = static_cast<int>(parse_int(key, value));
    else if (key == "synth-sequences") synth_sequences = static_cast<int>(parse_int(key, value));
    else if (key == "synth-frames") synth_frames = static_cast<int>(parse_int(key, value));
    else if (key == "encoder-channels") encoder_channels = static_cast<int>(parse_int(key, value));
    else if (key == "tcn-channels") tcn_channels = static_cast<int>(parse_int(key, value));
    else if (key == "hidden") hidden = static_cast<int>(parse_int(key, value));
    else if (key == "critic-hidden") critic_hidden = static_cast<int>(parse_int(key, value));
    else if (key == "refine-channels") refine_channels = static_cast<int>(parse_int(key, value));
    else if (key == "val-probe-windows") val_probe_windows = static_cast<int>(parse_int(key, value));
    else if (key == "variant") variant = value;
    else if (key == "corpus") corpus_path = value;
    else if (key == "skeleton") skeleton_path = value;
    else if (key == "checkpoint") checkpoint_path = value;
    else if (key == "report") report_path = value;
    else throw ParameterError("config: unknown key '" + key + "'");
}

const std::vector<std::string>& TrainConfig::keys() {
    static const std::vector<std::string> list = {
        "o-frames", "f-frames", "fps", "learning-rate", "n-critic", "batch-size",
        "epochs-sln", "epochs-dln", "clip-c", "m-joints", "m-fraction", "seed",
        "horizons-ms", "lambda-j", "val-fraction", "window-stride", "synth-sequences",
        "synth-frames", "encoder-channels", "tcn-channels", "hidden", "critic-hidden",
        "refine-channels", "val-probe-windows", "variant", "corpus", "skeleton",
        "checkpoint", "report"};
    return list;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParameterError("config line " + std::to_string(line_no) +
                                 ": expected key = value, got '" + line + "'");
        }
        cfg.set_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("config: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

void TrainConfig::apply_env() {
    const char* v = std::getenv("HVIS_SEED");
    if (v == nullptr || *v == '\0') return;
    seed = static_cast<unsigned long long>(parse_int("HVIS_SEED", v));
}

}  // namespace hvis::cli
