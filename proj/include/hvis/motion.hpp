#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hvis/skeleton.hpp"
#include "hvis/tensor.hpp"

namespace hvis::data {

// A motion clip: positions [frames x N x 3] in meters plus a frame rate.
struct MotionSequence {
    ad::TensorPtr positions;
    double fps = 25.0;
    std::string label;

    int frames() const { return positions ? positions->shape[0] : 0; }
    int joints() const { return positions ? positions->shape[1] : 0; }

    double at(int f, int j, int c) const {
        return positions->values[(static_cast<std::size_t>(f) * joints() + j) * 3 + c];
    }
    double& at(int f, int j, int c) {
        return positions->values[(static_cast<std::size_t>(f) * joints() + j) * 3 + c];
    }
};

MotionSequence make_sequence(int frames, int joints, double fps, std::string label = "");

// CSV schema: optional '# fps=<float>' comment, then a header
// 'frame,<joint>_x,<joint>_y,<joint>_z,...' matching the skeleton's joint
// order, one row per frame. A trailing 'predicted' column is tolerated on
// load (exposed through the optional out parameter, zeros when the column
// is absent) and written when predicted_flags is given.
MotionSequence load_csv(const std::filesystem::path& path, const SkeletonSpec& skeleton,
                        std::vector<int>* predicted_out = nullptr);
void save_csv(const std::filesystem::path& path, const MotionSequence& seq, const SkeletonSpec& skeleton,
              const std::vector<int>* predicted_flags = nullptr);

// Keeps every round(fps/target)-th frame and relabels the rate to target.
MotionSequence downsample(const MotionSequence& seq, double target_fps);

// Subtracts the root position from every joint of every frame.
MotionSequence root_aligned(const MotionSequence& seq, int root_joint);

// One training example: O observed frames and F future frames, both
// expressed relative to the root position at the last observed frame.
struct WindowPair {
    ad::TensorPtr observed;  // [O x N x 3]
    ad::TensorPtr future;    // [F x N x 3]
    int o_frames = 0, f_frames = 0, n_joints = 0;

    double obs(int f, int j, int c) const {
        return observed->values[(static_cast<std::size_t>(f) * n_joints + j) * 3 + c];
    }
    double fut(int f, int j, int c) const {
        return future->values[(static_cast<std::size_t>(f) * n_joints + j) * 3 + c];
    }
};

// Slides a window of O+F frames with the given stride. Returns no windows
// when the sequence is shorter than O+F.
std::vector<WindowPair> make_windows(const MotionSequence& seq, int o_frames, int f_frames, int stride, int root_joint);

// Repeats the last observed frame F times.
ad::TensorPtr zero_velocity_baseline(const ad::TensorPtr& observed, int f_frames);

// Mean per-joint position error in millimeters over the given future frame
// indices (all frames when empty). Inputs are [F x N x 3] and must already
// share one root alignment.
double mpjpe_mm(const ad::TensorPtr& pred, const ad::TensorPtr& truth, const std::vector<int>& frame_indices = {});

// Order-sensitive FNV-1a hash over frame counts, rates and raw positions.
std::uint64_t corpus_fingerprint(const std::vector<MotionSequence>& corpus);

}  // namespace hvis::data
