#include "hvis/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hvis/errors.hpp"

namespace hvis::cli {

namespace {

constexpr char kMagic[4] = {'H', 'V', 'I', 'S'};
constexpr std::uint8_t kKindTensor = 0;
constexpr std::uint8_t kKindText = 1;

// Fixed text segment names; tensor segments carry their parameter names.
const std::string kConfigSeg = "config";
const std::string kSkeletonSeg = "skeleton";
const std::string kMapSeg = "joint_map";
const std::string kHashSeg = "corpus_hash";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw FormatError("checkpoint: truncated stream");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v = 0;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string text(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
};

void put_segment_header(std::vector<std::uint8_t>& out, const std::string& name,
                        std::uint8_t kind) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(kind);
}

void put_text_segment(std::vector<std::uint8_t>& out, const std::string& name,
                      const std::string& text) {
    put_segment_header(out, name, kKindText);
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
}

void put_tensor_segment(std::vector<std::uint8_t>& out, const std::string& name,
                        const ad::Tensor& t) {
    put_segment_header(out, name, kKindTensor);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    put_u64(out, static_cast<std::uint64_t>(t.numel()));
    for (double v : t.values) put_f64(out, v);
}

}  // namespace

const ad::TensorPtr& CheckpointBundle::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw ContractError("checkpoint: no tensor segment named '" + name + "'");
}

std::vector<std::uint8_t> CheckpointBundle::to_bytes() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(4 + tensors.size()));
    put_text_segment(out, kConfigSeg, config_text);
    put_text_segment(out, kSkeletonSeg, skeleton_text);
    put_text_segment(out, kMapSeg, map_text);
    put_text_segment(out, kHashSeg, std::to_string(corpus_hash));
    for (const auto& [name, t] : tensors) put_tensor_segment(out, name, *t);
    return out;
}

CheckpointBundle CheckpointBundle::from_bytes(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    std::string magic = r.text(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw FormatError("checkpoint: bad magic, not a checkpoint file");
    }
    std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                          ", expected " + std::to_string(kVersion));
    }
    std::uint32_t count = r.u32();

    CheckpointBundle bundle;
    bool seen_hash = false;
    for (std::uint32_t s = 0; s < count; ++s) {
        std::uint32_t name_len = r.u32();
        std::string name = r.text(name_len);
        std::uint8_t kind = r.u8();
        if (kind == kKindText) {
            std::uint64_t len = r.u64();
            std::string text = r.text(static_cast<std::size_t>(len));
            if (name == kConfigSeg) bundle.config_text = text;
            else if (name == kSkeletonSeg) bundle.skeleton_text = text;
            else if (name == kMapSeg) bundle.map_text = text;
            else if (name == kHashSeg) {
                try {
                    bundle.corpus_hash = std::stoull(text);
                } catch (const std::exception&) {
                    throw FormatError("checkpoint: corpus_hash segment is not a number");
                }
                seen_hash = true;
            } else {
                throw FormatError("checkpoint: unknown text segment '" + name + "'");
            }
        } else if (kind == kKindTensor) {
            std::uint32_t rank = r.u32();
            ad::Shape shape;
            for (std::uint32_t i = 0; i < rank; ++i) {
                shape.push_back(static_cast<int>(r.u32()));
            }
            std::uint64_t n = r.u64();
            if (n != static_cast<std::uint64_t>(ad::shape_numel(shape))) {
                throw FormatError("checkpoint: tensor '" + name +
                                  "' count disagrees with its dimensions");
            }
            std::vector<double> values(static_cast<std::size_t>(n));
            for (auto& v : values) v = r.f64();
            bundle.tensors.emplace_back(name, ad::make_tensor(shape, values));
        } else {
            throw FormatError("checkpoint: unknown segment kind " + std::to_string(kind));
        }
    }
    if (r.pos != bytes.size()) throw FormatError("checkpoint: trailing bytes after last segment");
    if (!seen_hash) throw FormatError("checkpoint: missing corpus_hash segment");
    return bundle;
}

void CheckpointBundle::save(const std::filesystem::path& path) const {
    auto bytes = to_bytes();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("checkpoint: short write to '" + path.string() + "'");
}

CheckpointBundle CheckpointBundle::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

}  // namespace hvis::cli
