#pragma once

// Binary segment store: header (dataset id, window, stride, channel manifest,
// split tag), body of little-endian float32 segments with integer labels.

#include <string>
#include <vector>

#include "rtsf/data/stream.hpp"
#include "rtsf/rot/triads.hpp"

namespace rtsf::data {

struct SegmentStore {
    std::string dataset_id;
    std::string split_tag;
    size_t window = 0;
    size_t stride = 0;
    size_t class_count = 0;
    std::vector<std::string> class_names;
    std::vector<rot::ChannelInfo> channels;
    std::vector<Segment> segments;

    std::vector<size_t> class_histogram() const;
};

void save_store(const std::string& path, const SegmentStore& store);
SegmentStore load_store(const std::string& path);

// Per-channel statistics used for z-normalisation; always taken from the
// training split so no evaluation information leaks into preprocessing.
struct NormStats {
    std::vector<double> mean, stddev;
};

NormStats compute_norm_stats(const std::vector<Segment>& train, size_t channels,
                             size_t window);
void apply_norm(std::vector<Segment>& segments, const NormStats& stats, size_t window);

}  // namespace rtsf::data
