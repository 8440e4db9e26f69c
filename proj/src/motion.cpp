#include "hvis/motion.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hvis::data {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_cell(const std::string& cell, int row, int col) {
    const char* s = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    while (end && *end == ' ') ++end;
    if (end == s || (end && *end != '\0')) {
        throw FormatError("CSV row " + std::to_string(row) + ", column " + std::to_string(col) +
                          ": cannot parse '" + cell + "' as a number");
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

MotionSequence make_sequence(int frames, int joints, double fps, std::string label) {
    if (frames <= 0 || joints <= 0) throw ParameterError("sequence dimensions must be positive");
    MotionSequence seq;
    seq.positions = ad::make_tensor({frames, joints, 3});
    seq.fps = fps;
    seq.label = std::move(label);
    return seq;
}

MotionSequence load_csv(const std::filesystem::path& path, const SkeletonSpec& skeleton,
                        std::vector<int>* predicted_out) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open CSV file: " + path.string());
    const int n = skeleton.joint_count();

    double fps = 25.0;
    std::string line;
    int row_no = 0;
    bool header_seen = false;
    bool has_predicted = false;
    std::vector<int> flags;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            const auto pos = line.find("fps=");
            if (pos != std::string::npos) fps = parse_cell(line.substr(pos + 4), row_no, 1);
            continue;
        }
        auto cells = split_csv(line);
        if (!header_seen) {
            header_seen = true;
            std::vector<std::string> expected = {"frame"};
            for (int j = 0; j < n; ++j)
                for (const char* axis : {"_x", "_y", "_z"}) expected.push_back(skeleton.names[j] + axis);
            if (cells.size() == expected.size() + 1 && cells.back() == "predicted") {
                has_predicted = true;
                cells.pop_back();
            }
            if (cells.size() != expected.size()) {
                throw FormatError("CSV header: expected " + std::to_string(expected.size()) +
                                  " columns for this skeleton, found " + std::to_string(cells.size() + (has_predicted ? 1 : 0)));
            }
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (cells[i] != expected[i]) {
                    throw FormatError("CSV header column " + std::to_string(i + 1) + ": expected '" + expected[i] +
                                      "', found '" + cells[i] + "'");
                }
            }
            continue;
        }
        const std::size_t expected_cols = 1 + static_cast<std::size_t>(3) * n + (has_predicted ? 1 : 0);
        if (cells.size() != expected_cols) {
            throw FormatError("CSV row " + std::to_string(row_no) + ": expected " + std::to_string(expected_cols) +
                              " columns, found " + std::to_string(cells.size()));
        }
        std::vector<double> vals;
        vals.reserve(3 * n);
        parse_cell(cells[0], row_no, 1);  // frame index must at least be numeric
        for (int c = 0; c < 3 * n; ++c) vals.push_back(parse_cell(cells[1 + c], row_no, 2 + c));
        flags.push_back(has_predicted && parse_cell(cells.back(), row_no, static_cast<int>(cells.size())) != 0.0 ? 1 : 0);
        rows.push_back(std::move(vals));
    }
    if (!header_seen) throw FormatError("CSV file has no header: " + path.string());
    if (rows.empty()) throw FormatError("CSV file has no data rows: " + path.string());

    auto seq = make_sequence(static_cast<int>(rows.size()), n, fps, path.stem().string());
    for (int f = 0; f < seq.frames(); ++f)
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < 3; ++c) seq.at(f, j, c) = rows[f][static_cast<std::size_t>(j) * 3 + c];
    if (predicted_out) *predicted_out = std::move(flags);
    return seq;
}

void save_csv(const std::filesystem::path& path, const MotionSequence& seq, const SkeletonSpec& skeleton,
              const std::vector<int>* predicted_flags) {
    if (seq.joints() != skeleton.joint_count()) {
        throw ContractError("sequence has " + std::to_string(seq.joints()) + " joints but skeleton has " +
                            std::to_string(skeleton.joint_count()));
    }
    if (predicted_flags && static_cast<int>(predicted_flags->size()) != seq.frames()) {
        throw ContractError("predicted flag count does not match frame count");
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write CSV file: " + path.string());
    out << "# fps=" << format_double(seq.fps) << "\n";
    out << "frame";
    for (int j = 0; j < skeleton.joint_count(); ++j)
        for (const char* axis : {"_x", "_y", "_z"}) out << "," << skeleton.names[j] << axis;
    if (predicted_flags) out << ",predicted";
    out << "\n";
    for (int f = 0; f < seq.frames(); ++f) {
        out << f;
        for (int j = 0; j < seq.joints(); ++j)
            for (int c = 0; c < 3; ++c) out << "," << format_double(seq.at(f, j, c));
        if (predicted_flags) out << "," << (*predicted_flags)[f];
        out << "\n";
    }
}

MotionSequence downsample(const MotionSequence& seq, double target_fps) {
    if (target_fps <= 0.0) throw ParameterError("downsample: target fps must be positive");
    if (target_fps > seq.fps) {
        throw ParameterError("downsample: target fps " + std::to_string(target_fps) + " exceeds source fps " +
                             std::to_string(seq.fps));
    }
    const int stride = std::max(1, static_cast<int>(std::lround(seq.fps / target_fps)));
    const int kept = (seq.frames() + stride - 1) / stride;
    auto out = make_sequence(kept, seq.joints(), target_fps, seq.label);
    for (int f = 0; f < kept; ++f)
        for (int j = 0; j < seq.joints(); ++j)
            for (int c = 0; c < 3; ++c) out.at(f, j, c) = seq.at(f * stride, j, c);
    return out;
}

MotionSequence root_aligned(const MotionSequence& seq, int root_joint) {
    if (root_joint < 0 || root_joint >= seq.joints()) throw ParameterError("root_aligned: root joint out of range");
    auto out = make_sequence(seq.frames(), seq.joints(), seq.fps, seq.label);
    for (int f = 0; f < seq.frames(); ++f) {
        const double rx = seq.at(f, root_joint, 0), ry = seq.at(f, root_joint, 1), rz = seq.at(f, root_joint, 2);
        for (int j = 0; j < seq.joints(); ++j) {
            out.at(f, j, 0) = seq.at(f, j, 0) - rx;
            out.at(f, j, 1) = seq.at(f, j, 1) - ry;
            out.at(f, j, 2) = seq.at(f, j, 2) - rz;
        }
    }
    return out;
}

std::vector<WindowPair> make_windows(const MotionSequence& seq, int o_frames, int f_frames, int stride, int root_joint) {
    if (o_frames < 1 || f_frames < 1) throw ParameterError("make_windows: window lengths must be positive");
    if (stride < 1) throw ParameterError("make_windows: stride must be positive");
    if (root_joint < 0 || root_joint >= seq.joints()) throw ParameterError("make_windows: root joint out of range");
    const int n = seq.joints();
    const int span = o_frames + f_frames;
    std::vector<WindowPair> windows;
    for (int t0 = 0; t0 + span <= seq.frames(); t0 += stride) {
        WindowPair w;
        w.o_frames = o_frames;
        w.f_frames = f_frames;
        w.n_joints = n;
        w.observed = ad::make_tensor({o_frames, n, 3});
        w.future = ad::make_tensor({f_frames, n, 3});
        const int anchor = t0 + o_frames - 1;
        const double rx = seq.at(anchor, root_joint, 0);
        const double ry = seq.at(anchor, root_joint, 1);
        const double rz = seq.at(anchor, root_joint, 2);
        for (int f = 0; f < o_frames; ++f)
            for (int j = 0; j < n; ++j) {
                w.observed->values[(static_cast<std::size_t>(f) * n + j) * 3 + 0] = seq.at(t0 + f, j, 0) - rx;
                w.observed->values[(static_cast<std::size_t>(f) * n + j) * 3 + 1] = seq.at(t0 + f, j, 1) - ry;
                w.observed->values[(static_cast<std::size_t>(f) * n + j) * 3 + 2] = seq.at(t0 + f, j, 2) - rz;
            }
        for (int f = 0; f < f_frames; ++f)
            for (int j = 0; j < n; ++j) {
                w.future->values[(static_cast<std::size_t>(f) * n + j) * 3 + 0] = seq.at(t0 + o_frames + f, j, 0) - rx;
                w.future->values[(static_cast<std::size_t>(f) * n + j) * 3 + 1] = seq.at(t0 + o_frames + f, j, 1) - ry;
                w.future->values[(static_cast<std::size_t>(f) * n + j) * 3 + 2] = seq.at(t0 + o_frames + f, j, 2) - rz;
            }
        windows.push_back(std::move(w));
    }
    return windows;
}

ad::TensorPtr zero_velocity_baseline(const ad::TensorPtr& observed, int f_frames) {
    if (observed->rank() != 3) throw DimensionError("zero_velocity_baseline: expected [O x N x 3]");
    if (f_frames < 1) throw ParameterError("zero_velocity_baseline: future length must be positive");
    const int o = observed->shape[0], n = observed->shape[1];
    auto out = ad::make_tensor({f_frames, n, 3});
    const double* last = observed->values.data() + static_cast<std::size_t>(o - 1) * n * 3;
    for (int f = 0; f < f_frames; ++f)
        std::copy(last, last + static_cast<std::size_t>(n) * 3, out->values.begin() + static_cast<std::size_t>(f) * n * 3);
    return out;
}

double mpjpe_mm(const ad::TensorPtr& pred, const ad::TensorPtr& truth, const std::vector<int>& frame_indices) {
    if (pred->rank() != 3 || truth->rank() != 3 || pred->shape != truth->shape) {
        throw DimensionError("mpjpe: shapes disagree: " + ad::shape_str(pred->shape) + " vs " + ad::shape_str(truth->shape));
    }
    const int f_total = pred->shape[0], n = pred->shape[1];
    std::vector<int> frames = frame_indices;
    if (frames.empty())
        for (int f = 0; f < f_total; ++f) frames.push_back(f);
    for (int f : frames) {
        if (f < 0 || f >= f_total) throw ParameterError("mpjpe: frame index " + std::to_string(f) + " out of range");
    }
    double acc = 0.0;
    for (int f : frames)
        for (int j = 0; j < n; ++j) {
            const std::size_t base = (static_cast<std::size_t>(f) * n + j) * 3;
            const double dx = pred->values[base] - truth->values[base];
            const double dy = pred->values[base + 1] - truth->values[base + 1];
            const double dz = pred->values[base + 2] - truth->values[base + 2];
            acc += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    return 1000.0 * acc / (static_cast<double>(frames.size()) * n);
}

std::uint64_t corpus_fingerprint(const std::vector<MotionSequence>& corpus) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t count = corpus.size();
    mix(&count, sizeof(count));
    for (const auto& seq : corpus) {
        const std::int64_t dims[2] = {seq.frames(), seq.joints()};
        mix(dims, sizeof(dims));
        mix(&seq.fps, sizeof(seq.fps));
        mix(seq.positions->values.data(), seq.positions->values.size() * sizeof(double));
    }
    return h;
}

}  // namespace hvis::data
