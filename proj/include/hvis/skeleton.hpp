#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hvis/errors.hpp"

namespace hvis::data {

inline constexpr int kPartCount = 5;  // trunk, two arms, two legs

// Joint tree with a five-way kinematic partition. Exactly one joint has
// parent -1 (the root); every other parent index must point at an earlier
// or later joint without forming cycles.
struct SkeletonSpec {
    std::vector<std::string> names;
    std::vector<int> parents;
    std::vector<int> part_of;

    int joint_count() const { return static_cast<int>(names.size()); }
    int root() const;
    std::vector<int> joints_in_part(int part) const;

    // Throws DataError on structural problems (multiple roots, cycles,
    // out-of-range parents or part ids, duplicate names).
    void validate() const;

    // Plain-text format: one "name parent part" line per joint, '#' comments.
    static SkeletonSpec load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string to_text() const;
    static SkeletonSpec from_text(const std::string& text);
};

}  // namespace hvis::data
