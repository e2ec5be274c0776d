#pragma once

// Deterministic feature extraction over blocks of a segment. This is the
// forward-only engine used by the data tooling and the CLI; the training
// graph evaluates the same kernels through its own operator.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rtsf/common.hpp"
#include "rtsf/tsf/features.hpp"

namespace rtsf::tsf {

struct Series {
    std::vector<double> values;
    double sample_rate_hz = 1.0;
};

// Equal blocks cut from a segment along time. stride = length - overlap;
// a trailing partial block is dropped.
struct BlockSpec {
    size_t block_length = 0;
    size_t overlap = 0;
    std::vector<FeatureDef> features;

    size_t stride() const { return block_length - overlap; }
    size_t block_count(size_t segment_len) const {
        if (segment_len < block_length) return 0;
        return (segment_len - block_length) / stride() + 1;
    }
    void validate(size_t segment_len) const;
};

// axes x blocks x width reals, where width = feature values + 3 tag slots
// (location id, sensor type, axis type) appended per axis.
struct FeatureTensor {
    size_t axes = 0, blocks = 0, width = 0;
    std::vector<double> data;
    std::vector<std::array<int, 3>> axis_tags;

    double& at(size_t a, size_t b, size_t f) { return data[(a * blocks + b) * width + f]; }
    double at(size_t a, size_t b, size_t f) const { return data[(a * blocks + b) * width + f]; }
};

// Statistic selectors for the scalar helpers below.
enum class BasicStat {
    Mean,
    Min,
    Max,
    Quartile1,
    Median,
    Quartile3,
    TimeQuantile25,
    TimeQuantile50,
    TimeQuantile75,
    Skewness,
    Kurtosis,
    Variance,
    StdDev,
    Rms,
    AbsMax,
};

enum class ChangeStat {
    MeanChange,
    SumChange,
    MeanAbsChange,
    AbsSumChanges,
    AbsEnergy,
    Cid,
};

enum class ThresholdKind {
    Zero,
    Mean,
    Quartile1,
    Quartile2,
    Quartile3,
    Start,
    End,
    TimePos25,
    TimePos50,
    TimePos75,
};

enum class SpectrumStat { Mean, Variance, Skewness, Kurtosis };

double basic_stats(const Series& s, BasicStat which);
double change_stats(const Series& s, ChangeStat which);
double count_above(const Series& s, ThresholdKind kind);
double crossings(const Series& s, ThresholdKind kind);

std::vector<double> fft_amplitude(const Series& s);
std::vector<double> fft_amplitude_ratio(const Series& s);
std::vector<double> fft_angle(const Series& s);
double fft_stat(const Series& s, SpectrumStat which, bool ratio);

double autocorrelation(const Series& s, size_t lag);
double autocorr_lag_stats(const Series& s, size_t step, SpectrumStat which);

Series l2_norm_series(const Series& x, const Series& y, const Series& z);

// Feature extraction for one segment: `axes` holds equal-length sample rows,
// `tags` one (location, sensor, axis) triple per row.
FeatureTensor extract_block_features(const std::vector<std::vector<double>>& axes,
                                     const std::vector<std::array<int, 3>>& tags,
                                     const BlockSpec& spec);

// Names for the width entries of a block-feature row, tags included.
std::vector<std::string> feature_column_names(const BlockSpec& spec);

}  // namespace rtsf::tsf
