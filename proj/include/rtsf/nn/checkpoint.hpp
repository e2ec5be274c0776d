#pragma once

// Versioned binary checkpoint: header (magic, version, config hash, embedded
// config text), then named parameter blocks as 32-bit little-endian floats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rtsf/common.hpp"
#include "rtsf/nn/array.hpp"

namespace rtsf::nn {

inline constexpr char kCheckpointMagic[8] = {'R', 'T', 'S', 'F', 'C', 'K', 'P', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedBlock {
    std::string name;
    std::vector<size_t> shape;
    std::vector<float> data;
};

struct Checkpoint {
    uint64_t config_hash = 0;
    std::string config_text;
    std::vector<NamedBlock> blocks;
};

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
    if (!out) throw InputError("checkpoint write failed");
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw InputError("checkpoint read failed or file truncated");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!out) throw InputError("checkpoint write failed");
}

inline std::string read_string(std::istream& in) {
    const uint32_t len = read_le<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw InputError("checkpoint read failed or file truncated");
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_le<uint32_t>(out, kCheckpointVersion);
    detail::write_le<uint64_t>(out, ckpt.config_hash);
    detail::write_string(out, ckpt.config_text);
    detail::write_le<uint32_t>(out, static_cast<uint32_t>(ckpt.blocks.size()));
    for (const auto& blk : ckpt.blocks) {
        detail::write_string(out, blk.name);
        detail::write_le<uint32_t>(out, static_cast<uint32_t>(blk.shape.size()));
        size_t count = 1;
        for (size_t d : blk.shape) {
            detail::write_le<uint64_t>(out, static_cast<uint64_t>(d));
            count *= d;
        }
        if (count != blk.data.size())
            throw UsageError("checkpoint block " + blk.name + " shape/data mismatch");
        for (float f : blk.data) detail::write_le<float>(out, f);
    }
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw InputError("not a checkpoint file: " + path);
    const uint32_t version = detail::read_le<uint32_t>(in);
    if (version != kCheckpointVersion)
        throw InputError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config_hash = detail::read_le<uint64_t>(in);
    ckpt.config_text = detail::read_string(in);
    const uint32_t nblocks = detail::read_le<uint32_t>(in);
    ckpt.blocks.resize(nblocks);
    for (auto& blk : ckpt.blocks) {
        blk.name = detail::read_string(in);
        const uint32_t ndim = detail::read_le<uint32_t>(in);
        blk.shape.resize(ndim);
        size_t count = 1;
        for (auto& d : blk.shape) {
            d = static_cast<size_t>(detail::read_le<uint64_t>(in));
            count *= d;
        }
        blk.data.resize(count);
        for (auto& f : blk.data) f = detail::read_le<float>(in);
    }
    return ckpt;
}

// FNV-1a over the canonical config text.
inline uint64_t fnv1a_hash(const std::string& text) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace rtsf::nn
