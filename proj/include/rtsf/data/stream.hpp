#pragma once

// Labeled sensor streams and boundary-respecting segmentation. A window is
// emitted only from a maximal run that stays inside one trial, carries one
// non-NULL label throughout, and contains no residual NaN.

#include <string>
#include <vector>

#include "rtsf/common.hpp"
#include "rtsf/rot/triads.hpp"

namespace rtsf::data {

inline constexpr int kNullLabel = -1;

struct LabeledStream {
    std::vector<std::vector<double>> channels;  // [channel][sample], NaN allowed
    std::vector<int> labels;                    // kNullLabel marks non-target samples
    int subject = 0;
    std::string trial;
    double sample_rate_hz = 0.0;

    size_t length() const { return labels.size(); }
    void check() const;
};

// Fills NaN runs of up to round(max_gap_seconds * rate) samples that are
// bounded by finite values on both sides; longer and edge runs stay NaN.
LabeledStream interpolate_nan(const LabeledStream& s, double max_gap_seconds = 0.2);

struct Segment {
    std::vector<float> data;  // [channel][window] row-major
    int label = 0;
    int subject = 0;
    std::string trial;
};

// Maximal clean run inside a stream (sample index range, uniform label).
struct CleanRun {
    size_t begin = 0, end = 0;  // half-open
    int label = 0;
};

std::vector<CleanRun> clean_runs(const LabeledStream& s);

// Sliding windows fully inside clean runs; per run floor((len-W)/S)+1 windows.
std::vector<Segment> segment_stream(const LabeledStream& s, size_t window, size_t stride);

}  // namespace rtsf::data
