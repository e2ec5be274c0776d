#include "rtsf/data/store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace rtsf::data {

namespace {

constexpr char kMagic[8] = {'R', 'T', 'S', 'F', 'S', 'E', 'G', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
    if (!out) throw InputError("segment store write failed");
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw InputError("segment store read failed or file truncated");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint32_t len = read_le<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw InputError("segment store read failed or file truncated");
    return s;
}

}  // namespace

std::vector<size_t> SegmentStore::class_histogram() const {
    std::vector<size_t> hist(class_count, 0);
    for (const auto& seg : segments) {
        if (seg.label < 0 || static_cast<size_t>(seg.label) >= class_count)
            throw InputError("segment label out of range in store");
        ++hist[static_cast<size_t>(seg.label)];
    }
    return hist;
}

void save_store(const std::string& path, const SegmentStore& store) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open segment store for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<uint32_t>(out, kVersion);
    write_string(out, store.dataset_id);
    write_string(out, store.split_tag);
    write_le<uint32_t>(out, static_cast<uint32_t>(store.window));
    write_le<uint32_t>(out, static_cast<uint32_t>(store.stride));
    write_le<uint32_t>(out, static_cast<uint32_t>(store.class_count));
    write_le<uint32_t>(out, static_cast<uint32_t>(store.class_names.size()));
    for (const auto& name : store.class_names) write_string(out, name);
    write_le<uint32_t>(out, static_cast<uint32_t>(store.channels.size()));
    for (const auto& ch : store.channels) {
        write_string(out, ch.name);
        write_le<int32_t>(out, ch.location);
        write_le<uint32_t>(out, static_cast<uint32_t>(ch.sensor));
        write_le<uint32_t>(out, static_cast<uint32_t>(ch.axis));
    }
    write_le<uint64_t>(out, static_cast<uint64_t>(store.segments.size()));
    const size_t values = store.channels.size() * store.window;
    for (const auto& seg : store.segments) {
        if (seg.data.size() != values)
            throw UsageError("segment size does not match store manifest");
        write_le<int32_t>(out, seg.label);
        write_le<int32_t>(out, seg.subject);
        write_string(out, seg.trial);
        for (float f : seg.data) write_le<float>(out, f);
    }
}

SegmentStore load_store(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open segment store: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw InputError("not a segment store: " + path);
    const uint32_t version = read_le<uint32_t>(in);
    if (version != kVersion)
        throw InputError("unsupported segment store version " + std::to_string(version));
    SegmentStore store;
    store.dataset_id = read_string(in);
    store.split_tag = read_string(in);
    store.window = read_le<uint32_t>(in);
    store.stride = read_le<uint32_t>(in);
    store.class_count = read_le<uint32_t>(in);
    const uint32_t nnames = read_le<uint32_t>(in);
    for (uint32_t i = 0; i < nnames; ++i) store.class_names.push_back(read_string(in));
    const uint32_t nch = read_le<uint32_t>(in);
    store.channels.resize(nch);
    for (auto& ch : store.channels) {
        ch.name = read_string(in);
        ch.location = read_le<int32_t>(in);
        ch.sensor = static_cast<rot::SensorType>(read_le<uint32_t>(in));
        ch.axis = static_cast<rot::AxisType>(read_le<uint32_t>(in));
    }
    const uint64_t nseg = read_le<uint64_t>(in);
    const size_t values = store.channels.size() * store.window;
    store.segments.resize(nseg);
    for (auto& seg : store.segments) {
        seg.label = read_le<int32_t>(in);
        seg.subject = read_le<int32_t>(in);
        seg.trial = read_string(in);
        seg.data.resize(values);
        for (auto& f : seg.data) f = read_le<float>(in);
    }
    return store;
}

NormStats compute_norm_stats(const std::vector<Segment>& train, size_t channels,
                             size_t window) {
    NormStats stats;
    stats.mean.assign(channels, 0.0);
    stats.stddev.assign(channels, 1.0);
    if (train.empty()) return stats;
    std::vector<double> sum(channels, 0.0), sum2(channels, 0.0);
    for (const auto& seg : train)
        for (size_t c = 0; c < channels; ++c)
            for (size_t t = 0; t < window; ++t) {
                const double v = seg.data[c * window + t];
                sum[c] += v;
                sum2[c] += v * v;
            }
    const double n = static_cast<double>(train.size() * window);
    for (size_t c = 0; c < channels; ++c) {
        stats.mean[c] = sum[c] / n;
        const double var = sum2[c] / n - stats.mean[c] * stats.mean[c];
        stats.stddev[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return stats;
}

void apply_norm(std::vector<Segment>& segments, const NormStats& stats, size_t window) {
    for (auto& seg : segments)
        for (size_t c = 0; c < stats.mean.size(); ++c)
            for (size_t t = 0; t < window; ++t) {
                auto& v = seg.data[c * window + t];
                v = static_cast<float>((v - stats.mean[c]) / stats.stddev[c]);
            }
}

}  // namespace rtsf::data
