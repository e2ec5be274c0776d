#include "rtsf/data/stream.hpp"

#include <cmath>

namespace rtsf::data {

void LabeledStream::check() const {
    for (const auto& ch : channels)
        if (ch.size() != labels.size())
            throw ConfigError("stream channels and labels have different lengths");
    if (sample_rate_hz <= 0.0) throw ConfigError("stream sample rate must be positive");
}

LabeledStream interpolate_nan(const LabeledStream& s, double max_gap_seconds) {
    s.check();
    const size_t max_gap =
        static_cast<size_t>(std::llround(max_gap_seconds * s.sample_rate_hz));
    LabeledStream out = s;
    for (auto& ch : out.channels) {
        const size_t n = ch.size();
        size_t i = 0;
        while (i < n) {
            if (!std::isnan(ch[i])) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < n && std::isnan(ch[j])) ++j;
            const size_t gap = j - i;
            const bool bounded = i > 0 && j < n;
            if (bounded && gap <= max_gap) {
                const double left = ch[i - 1];
                const double right = ch[j];
                for (size_t k = 0; k < gap; ++k)
                    ch[i + k] = left + (right - left) *
                                           static_cast<double>(k + 1) /
                                           static_cast<double>(gap + 1);
            }
            i = j;
        }
    }
    return out;
}

std::vector<CleanRun> clean_runs(const LabeledStream& s) {
    s.check();
    const size_t n = s.length();
    std::vector<bool> dirty(n, false);
    for (const auto& ch : s.channels)
        for (size_t i = 0; i < n; ++i)
            if (std::isnan(ch[i])) dirty[i] = true;
    std::vector<CleanRun> runs;
    size_t i = 0;
    while (i < n) {
        if (dirty[i] || s.labels[i] == kNullLabel) {
            ++i;
            continue;
        }
        const int label = s.labels[i];
        size_t j = i;
        while (j < n && !dirty[j] && s.labels[j] == label) ++j;
        runs.push_back({i, j, label});
        i = j;
    }
    return runs;
}

std::vector<Segment> segment_stream(const LabeledStream& s, size_t window, size_t stride) {
    if (window == 0 || stride == 0)
        throw ConfigError("window and stride must be positive");
    const auto runs = clean_runs(s);
    std::vector<Segment> out;
    for (const auto& run : runs) {
        const size_t len = run.end - run.begin;
        if (len < window) continue;
        const size_t count = (len - window) / stride + 1;
        for (size_t w = 0; w < count; ++w) {
            const size_t start = run.begin + w * stride;
            Segment seg;
            seg.label = run.label;
            seg.subject = s.subject;
            seg.trial = s.trial;
            seg.data.resize(s.channels.size() * window);
            for (size_t c = 0; c < s.channels.size(); ++c)
                for (size_t t = 0; t < window; ++t)
                    seg.data[c * window + t] = static_cast<float>(s.channels[c][start + t]);
            out.push_back(std::move(seg));
        }
    }
    return out;
}

}  // namespace rtsf::data
