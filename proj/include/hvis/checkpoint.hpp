#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hvis/tensor.hpp"

namespace hvis::cli {

// Serialized model state. A bundle is a flat list of named segments, each
// either a tensor or a text blob, written in a fixed binary layout:
//
//   "HVIS"  u32 version  u32 segment_count
//   per segment: u32 name_len, name bytes, u8 kind,
//     kind 0 (tensor): u32 rank, u32 dims[rank], u64 count, f64 values (LE)
//     kind 1 (text):   u64 byte_len, bytes
//
// Loading an unknown version or a malformed stream throws FormatError.
// save(load(p)) reproduces the file at p byte for byte.
struct CheckpointBundle {
    static constexpr std::uint32_t kVersion = 1;

    std::string config_text;
    std::string skeleton_text;
    std::string map_text;  // empty when refinement is disabled
    std::uint64_t corpus_hash = 0;
    std::vector<std::pair<std::string, ad::TensorPtr>> tensors;

    const ad::TensorPtr& tensor(const std::string& name) const;

    std::vector<std::uint8_t> to_bytes() const;
    static CheckpointBundle from_bytes(const std::vector<std::uint8_t>& bytes);

    void save(const std::filesystem::path& path) const;
    static CheckpointBundle load(const std::filesystem::path& path);
};

}  // namespace hvis::cli
