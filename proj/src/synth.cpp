#include "hvis/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

namespace hvis::data {

SkeletonSpec synthetic_skeleton() {
    SkeletonSpec s;
    s.names = {"root", "spine", "neck", "head", "l_arm", "l_hand", "r_arm", "r_hand",
               "l_leg", "l_foot", "r_leg", "r_foot"};
    s.parents = {-1, 0, 1, 2, 2, 4, 2, 6, 0, 8, 0, 10};
    s.part_of = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
    s.validate();
    return s;
}

std::vector<double> rest_pose(const SkeletonSpec& skeleton) {
    const int n = skeleton.joint_count();
    std::vector<double> pose(static_cast<std::size_t>(n) * 3, 0.0);
    const auto standard = synthetic_skeleton();
    if (skeleton.names == standard.names && skeleton.parents == standard.parents) {
        constexpr double kStandardPose[12][3] = {
            {0.00, 0.95, 0.00}, {0.00, 1.20, 0.00},  {0.00, 1.45, 0.00},  {0.00, 1.60, 0.00},
            {0.20, 1.40, 0.00}, {0.45, 1.15, 0.00},  {-0.20, 1.40, 0.00}, {-0.45, 1.15, 0.00},
            {0.10, 0.50, 0.00}, {0.10, 0.05, 0.00},  {-0.10, 0.50, 0.00}, {-0.10, 0.05, 0.00}};
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < 3; ++c) pose[static_cast<std::size_t>(j) * 3 + c] = kStandardPose[j][c];
        return pose;
    }
    // Generic fallback: spread parts sideways and chains downward.
    constexpr double kPartX[kPartCount] = {0.0, 0.3, -0.3, 0.15, -0.15};
    std::vector<int> depth(n, 0);
    for (int j = 0; j < n; ++j) {
        int d = 0, cur = j;
        while (skeleton.parents[cur] >= 0) {
            cur = skeleton.parents[cur];
            ++d;
        }
        depth[j] = d;
    }
    for (int j = 0; j < n; ++j) {
        pose[static_cast<std::size_t>(j) * 3 + 0] = kPartX[skeleton.part_of[j]];
        pose[static_cast<std::size_t>(j) * 3 + 1] = 1.5 - 0.25 * depth[j];
        pose[static_cast<std::size_t>(j) * 3 + 2] = 0.05 * j;
    }
    return pose;
}

std::vector<int> synthetic_hard_joints(const SkeletonSpec& skeleton) {
    const int n = skeleton.joint_count();
    const int want = (n + 3) / 4;
    std::set<int> is_parent;
    for (int j = 0; j < n; ++j)
        if (skeleton.parents[j] >= 0) is_parent.insert(skeleton.parents[j]);

    // Per limb part, deepest-first candidates (tips, then their parents).
    std::vector<std::vector<int>> candidates(kPartCount);
    for (int part = 1; part < kPartCount; ++part) {
        auto joints = skeleton.joints_in_part(part);
        std::sort(joints.begin(), joints.end(), [&](int a, int b) {
            const bool tip_a = !is_parent.count(a), tip_b = !is_parent.count(b);
            if (tip_a != tip_b) return tip_a;
            return a > b;
        });
        candidates[part] = joints;
    }
    std::vector<int> hard;
    std::size_t round = 0;
    while (static_cast<int>(hard.size()) < want) {
        bool progress = false;
        for (int part = 1; part < kPartCount && static_cast<int>(hard.size()) < want; ++part) {
            if (round < candidates[part].size()) {
                hard.push_back(candidates[part][round]);
                progress = true;
            }
        }
        if (!progress) break;
        ++round;
    }
    std::sort(hard.begin(), hard.end());
    return hard;
}

std::vector<MotionSequence> synth_corpus(const SkeletonSpec& skeleton, int n_sequences, int frames,
                                         std::uint64_t seed, double fps) {
    skeleton.validate();
    if (n_sequences < 1) throw ParameterError("synth_corpus: sequence count must be positive");
    if (frames < 2) throw ParameterError("synth_corpus: frame count must be at least 2");
    if (fps <= 0.0) throw ParameterError("synth_corpus: fps must be positive");

    const int n = skeleton.joint_count();
    const auto rest = rest_pose(skeleton);
    const auto hard = synthetic_hard_joints(skeleton);
    std::vector<bool> is_hard(n, false);
    for (int j : hard) is_hard[j] = true;

    ad::Rng rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto unit_dir = [&] {
        // Rejection-sampled unit vector, deterministic under the shared rng.
        while (true) {
            const double x = 2.0 * uni(rng) - 1.0, y = 2.0 * uni(rng) - 1.0, z = 2.0 * uni(rng) - 1.0;
            const double len = std::sqrt(x * x + y * y + z * z);
            if (len > 0.1 && len <= 1.0) return std::array<double, 3>{x / len, y / len, z / len};
        }
    };

    std::vector<MotionSequence> corpus;
    corpus.reserve(n_sequences);
    for (int s = 0; s < n_sequences; ++s) {
        auto seq = make_sequence(frames, n, fps, "synth_" + std::to_string(s));
        for (int j = 0; j < n; ++j) {
            const double* rj = rest.data() + static_cast<std::size_t>(j) * 3;
            if (skeleton.part_of[j] == 0) {
                for (int f = 0; f < frames; ++f)
                    for (int c = 0; c < 3; ++c) seq.at(f, j, c) = rj[c];
                continue;
            }
            if (!is_hard[j]) {
                const auto dir = unit_dir();
                const double amp = 0.15 + 0.15 * uni(rng);
                const double omega = 2.0 + 2.0 * uni(rng);
                const double phase = kTwoPi * uni(rng);
                for (int f = 0; f < frames; ++f) {
                    const double t = f / fps;
                    const double m = amp * std::sin(omega * t + phase);
                    for (int c = 0; c < 3; ++c) seq.at(f, j, c) = rj[c] + m * dir[c];
                }
                continue;
            }
            // Hard joint: bigger swing, wandering frequency, small noise walk.
            const auto dir = unit_dir();
            const double amp = 0.45 + 0.15 * uni(rng);
            const double omega0 = 4.0 + 2.0 * uni(rng);
            const double beta = 1.0 + 1.0 * uni(rng);
            const double nu = 0.8 + 0.8 * uni(rng);
            const double phase = kTwoPi * uni(rng);
            const double phase2 = kTwoPi * uni(rng);
            double walk[3] = {0.0, 0.0, 0.0};
            for (int f = 0; f < frames; ++f) {
                const double t = f / fps;
                const double theta = omega0 * t + beta * std::sin(nu * t + phase2) + phase;
                const double m = amp * std::sin(theta);
                for (int c = 0; c < 3; ++c) {
                    walk[c] += 0.003 * gauss(rng);
                    seq.at(f, j, c) = rj[c] + m * dir[c] + walk[c];
                }
            }
        }
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

}  // namespace hvis::data
