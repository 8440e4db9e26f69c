#pragma once

#include <cstdint>
#include <vector>

#include "hvis/motion.hpp"
#include "hvis/skeleton.hpp"

namespace hvis::data {

// The built-in 12-joint skeleton: 4 trunk joints plus 2 joints on each of
// four limbs, covering all five parts.
SkeletonSpec synthetic_skeleton();

// Deterministic rest pose for any skeleton (meters).
std::vector<double> rest_pose(const SkeletonSpec& skeleton);

// Joints that receive deliberately irregular motion: ceil(N/4) limb tips,
// cycling through the limb parts. These are the hardest to predict by
// construction.
std::vector<int> synthetic_hard_joints(const SkeletonSpec& skeleton);

// Seed-deterministic corpus. Trunk joints stay at rest (zero velocity),
// limb joints swing sinusoidally, hard joints get a larger, frequency-
// modulated swing plus a low-amplitude noise walk.
std::vector<MotionSequence> synth_corpus(const SkeletonSpec& skeleton, int n_sequences, int frames,
                                         std::uint64_t seed, double fps = 25.0);

}  // namespace hvis::data
