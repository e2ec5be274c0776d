#include "rtsf/tsf/engine.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rtsf::tsf {

namespace {

WindowContext<double> context_for(const Series& s) {
    if (s.values.empty()) throw DomainError("series is empty");
    return WindowContext<double>(std::span<const double>(s.values));
}

void require_pairs(const Series& s) {
    if (s.values.size() < 2) throw DomainError("change features need at least 2 samples");
}

FeatureDef def_for_threshold(ThresholdKind kind, bool crossing) {
    switch (kind) {
        case ThresholdKind::Zero:
            return {crossing ? kCrossZero : kCountAboveZero};
        case ThresholdKind::Mean:
            return {crossing ? kCrossMean : kCountAboveMean};
        case ThresholdKind::Quartile1:
            if (!crossing) throw ConfigError("count-above has no quartile threshold");
            return {kCrossQ1};
        case ThresholdKind::Quartile2:
            if (!crossing) throw ConfigError("count-above has no quartile threshold");
            return {kCrossQ2};
        case ThresholdKind::Quartile3:
            if (!crossing) throw ConfigError("count-above has no quartile threshold");
            return {kCrossQ3};
        case ThresholdKind::Start:
            return {crossing ? kCrossStart : kCountAboveStart};
        case ThresholdKind::End:
            return {crossing ? kCrossEnd : kCountAboveEnd};
        case ThresholdKind::TimePos25:
            return {crossing ? kCrossT25 : kCountAboveT25};
        case ThresholdKind::TimePos50:
            return {crossing ? kCrossT50 : kCountAboveT50};
        case ThresholdKind::TimePos75:
            return {crossing ? kCrossT75 : kCountAboveT75};
    }
    throw ConfigError("bad threshold kind");
}

}  // namespace

void validate_feature_def(const FeatureDef& def, size_t window_len) {
    if (def.id < 1 || def.id > 49)
        throw ConfigError("unknown feature id " + std::to_string(def.id));
    if (window_len == 0) throw ConfigError("zero-length feature window");
    if (needs_pairs(def.id) && window_len < 2)
        throw ConfigError("feature id " + std::to_string(def.id) +
                          " needs windows of at least 2 samples");
    if (def.id == kQuantile && (def.level < 0.0 || def.level > 1.0))
        throw ConfigError("quantile level must lie in [0,1]");
    if (def.id == kAutocorrelation) {
        if (def.lag < 0) throw ConfigError("autocorrelation lag must be non-negative");
        if (static_cast<size_t>(def.lag) > window_len / 2)
            throw ConfigError("autocorrelation lag " + std::to_string(def.lag) +
                              " exceeds half the window (" +
                              std::to_string(window_len / 2) + ")");
    }
    if (def.id >= kAcMean && def.id <= kAcKurtosis) {
        if (def.step < 1) throw ConfigError("autocorrelation lag step must be >= 1");
        if (static_cast<size_t>(def.step) > window_len / 2)
            throw ConfigError("no autocorrelation lag <= half the window for step " +
                              std::to_string(def.step));
    }
}

std::string feature_name(const FeatureDef& def) {
    switch (def.id) {
        case kMean: return "mean";
        case kMin: return "min";
        case kMax: return "max";
        case kQuantile: {
            std::ostringstream os;
            os << (def.qkind == QuantKind::Value ? "quantile_" : "time_quantile_")
               << def.level;
            return os.str();
        }
        case kSkewness: return "skewness";
        case kKurtosis: return "kurtosis";
        case kVariance: return "variance";
        case kStdDev: return "stddev";
        case kRms: return "rms";
        case kMeanChange: return "mean_change";
        case kSumChange: return "sum_change";
        case kMeanAbsChange: return "mean_abs_change";
        case kAbsEnergy: return "abs_energy";
        case kAbsSumChanges: return "abs_sum_changes";
        case kAbsMax: return "abs_max";
        case kCid: return "cid";
        case kCountAboveZero: return "count_above_zero";
        case kCountAboveMean: return "count_above_mean";
        case kCountAboveStart: return "count_above_start";
        case kCountAboveT25: return "count_above_t25";
        case kCountAboveT50: return "count_above_t50";
        case kCountAboveT75: return "count_above_t75";
        case kCountAboveEnd: return "count_above_end";
        case kCrossZero: return "crossings_zero";
        case kCrossMean: return "crossings_mean";
        case kCrossQ1: return "crossings_q1";
        case kCrossQ2: return "crossings_q2";
        case kCrossQ3: return "crossings_q3";
        case kCrossStart: return "crossings_start";
        case kCrossT25: return "crossings_t25";
        case kCrossT50: return "crossings_t50";
        case kCrossT75: return "crossings_t75";
        case kCrossEnd: return "crossings_end";
        case kFftAmplitude: return "fft_amplitude";
        case kFftAmplitudeRatio: return "fft_amplitude_ratio";
        case kFftAmpMean: return "fft_amp_mean";
        case kFftAmpVariance: return "fft_amp_variance";
        case kFftAmpSkewness: return "fft_amp_skewness";
        case kFftAmpKurtosis: return "fft_amp_kurtosis";
        case kFftRatioMean: return "fft_ratio_mean";
        case kFftRatioVariance: return "fft_ratio_variance";
        case kFftRatioSkewness: return "fft_ratio_skewness";
        case kFftRatioKurtosis: return "fft_ratio_kurtosis";
        case kFftAngle: return "fft_angle";
        case kAutocorrelation: return "autocorr_lag" + std::to_string(def.lag);
        case kAcMean: return "ac_mean_n" + std::to_string(def.step);
        case kAcVariance: return "ac_variance_n" + std::to_string(def.step);
        case kAcSkewness: return "ac_skewness_n" + std::to_string(def.step);
        case kAcKurtosis: return "ac_kurtosis_n" + std::to_string(def.step);
        default: return "feature_" + std::to_string(def.id);
    }
}

std::vector<FeatureDef> parse_selection_line(const std::string& line) {
    std::istringstream is(line);
    std::string tok;
    if (!(is >> tok)) return {};
    if (tok[0] == '#') return {};
    FeatureDef def;
    try {
        def.id = std::stoi(tok);
    } catch (const std::exception&) {
        throw ConfigError("bad feature id token: " + tok);
    }
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad feature parameter (want key=value): " + tok);
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "level") {
            def.level = std::stod(val);
        } else if (key == "kind") {
            if (val == "value") def.qkind = QuantKind::Value;
            else if (val == "time") def.qkind = QuantKind::Time;
            else throw ConfigError("quantile kind must be value|time, got " + val);
        } else if (key == "lag") {
            def.lag = std::stoi(val);
        } else if (key == "n") {
            def.step = std::stoi(val);
        } else {
            throw ConfigError("unknown feature parameter: " + key);
        }
    }
    return {def};
}

std::vector<FeatureDef> parse_selection_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open feature selection file: " + path);
    std::vector<FeatureDef> defs;
    std::string line;
    while (std::getline(in, line)) {
        auto parsed = parse_selection_line(line);
        defs.insert(defs.end(), parsed.begin(), parsed.end());
    }
    if (defs.empty()) throw ConfigError("feature selection file is empty: " + path);
    return defs;
}

void BlockSpec::validate(size_t segment_len) const {
    if (block_length == 0) throw ConfigError("block_length must be positive");
    if (overlap >= block_length)
        throw ConfigError("overlap must be smaller than block_length");
    if (segment_len < block_length)
        throw ConfigError("segment of " + std::to_string(segment_len) +
                          " samples is shorter than block_length " +
                          std::to_string(block_length));
    if (features.empty()) throw ConfigError("block spec selects no features");
    for (const auto& def : features) validate_feature_def(def, block_length);
}

double basic_stats(const Series& s, BasicStat which) {
    auto ctx = context_for(s);
    FeatureDef def;
    switch (which) {
        case BasicStat::Mean: def.id = kMean; break;
        case BasicStat::Min: def.id = kMin; break;
        case BasicStat::Max: def.id = kMax; break;
        case BasicStat::Quartile1: def = {kQuantile, QuantKind::Value, 0.25}; break;
        case BasicStat::Median: def = {kQuantile, QuantKind::Value, 0.5}; break;
        case BasicStat::Quartile3: def = {kQuantile, QuantKind::Value, 0.75}; break;
        case BasicStat::TimeQuantile25: def = {kQuantile, QuantKind::Time, 0.25}; break;
        case BasicStat::TimeQuantile50: def = {kQuantile, QuantKind::Time, 0.5}; break;
        case BasicStat::TimeQuantile75: def = {kQuantile, QuantKind::Time, 0.75}; break;
        case BasicStat::Skewness: def.id = kSkewness; break;
        case BasicStat::Kurtosis: def.id = kKurtosis; break;
        case BasicStat::Variance: def.id = kVariance; break;
        case BasicStat::StdDev: def.id = kStdDev; break;
        case BasicStat::Rms: def.id = kRms; break;
        case BasicStat::AbsMax: def.id = kAbsMax; break;
    }
    double out = 0;
    eval_feature(ctx, def, &out);
    return out;
}

double change_stats(const Series& s, ChangeStat which) {
    auto ctx = context_for(s);
    FeatureDef def;
    switch (which) {
        case ChangeStat::MeanChange: def.id = kMeanChange; break;
        case ChangeStat::SumChange: def.id = kSumChange; break;
        case ChangeStat::MeanAbsChange: def.id = kMeanAbsChange; break;
        case ChangeStat::AbsSumChanges: def.id = kAbsSumChanges; break;
        case ChangeStat::AbsEnergy: def.id = kAbsEnergy; break;
        case ChangeStat::Cid: def.id = kCid; break;
    }
    if (def.id != kAbsEnergy) require_pairs(s);
    double out = 0;
    eval_feature(ctx, def, &out);
    return out;
}

double count_above(const Series& s, ThresholdKind kind) {
    auto ctx = context_for(s);
    double out = 0;
    eval_feature(ctx, def_for_threshold(kind, false), &out);
    return out;
}

double crossings(const Series& s, ThresholdKind kind) {
    auto ctx = context_for(s);
    double out = 0;
    eval_feature(ctx, def_for_threshold(kind, true), &out);
    return out;
}

std::vector<double> fft_amplitude(const Series& s) {
    auto ctx = context_for(s);
    return ctx.amplitude();
}

std::vector<double> fft_amplitude_ratio(const Series& s) {
    auto ctx = context_for(s);
    return ctx.amplitude_ratio();
}

std::vector<double> fft_angle(const Series& s) {
    auto ctx = context_for(s);
    return ctx.angle();
}

double fft_stat(const Series& s, SpectrumStat which, bool ratio) {
    auto ctx = context_for(s);
    FeatureDef def;
    def.id = (ratio ? kFftRatioMean : kFftAmpMean) + static_cast<int>(which);
    double out = 0;
    eval_feature(ctx, def, &out);
    return out;
}

double autocorrelation(const Series& s, size_t lag) {
    auto ctx = context_for(s);
    if (lag > ctx.max_lag())
        throw ConfigError("autocorrelation lag " + std::to_string(lag) +
                          " exceeds half the series length");
    return ctx.autocorr(lag);
}

double autocorr_lag_stats(const Series& s, size_t step, SpectrumStat which) {
    auto ctx = context_for(s);
    if (step < 1) throw ConfigError("lag step must be >= 1");
    FeatureDef def;
    def.id = kAcMean + static_cast<int>(which);
    def.step = static_cast<int>(step);
    double out = 0;
    eval_feature(ctx, def, &out);
    return out;
}

Series l2_norm_series(const Series& x, const Series& y, const Series& z) {
    if (x.values.size() != y.values.size() || y.values.size() != z.values.size())
        throw ConfigError("triad series lengths differ");
    Series out;
    out.sample_rate_hz = x.sample_rate_hz;
    out.values.resize(x.values.size());
    for (size_t i = 0; i < x.values.size(); ++i)
        out.values[i] = std::sqrt(x.values[i] * x.values[i] + y.values[i] * y.values[i] +
                                  z.values[i] * z.values[i]);
    return out;
}

FeatureTensor extract_block_features(const std::vector<std::vector<double>>& axes,
                                     const std::vector<std::array<int, 3>>& tags,
                                     const BlockSpec& spec) {
    if (axes.empty()) throw ConfigError("segment has no axes");
    if (tags.size() != axes.size())
        throw ConfigError("axis tag count does not match axis count");
    const size_t len = axes[0].size();
    for (const auto& row : axes)
        if (row.size() != len) throw ConfigError("segment axes have different lengths");
    spec.validate(len);

    FeatureTensor out;
    out.axes = axes.size();
    out.blocks = spec.block_count(len);
    out.width = selection_width(std::span<const FeatureDef>(spec.features),
                                spec.block_length) + 3;
    out.axis_tags = tags;
    out.data.assign(out.axes * out.blocks * out.width, 0.0);

    for (size_t a = 0; a < out.axes; ++a) {
        for (size_t b = 0; b < out.blocks; ++b) {
            const size_t off = b * spec.stride();
            WindowContext<double> ctx(
                std::span<const double>(axes[a]).subspan(off, spec.block_length));
            size_t f = 0;
            for (const auto& def : spec.features) {
                eval_feature(ctx, def, &out.at(a, b, f));
                f += feature_width(def, spec.block_length);
            }
            out.at(a, b, f + 0) = tags[a][0];
            out.at(a, b, f + 1) = tags[a][1];
            out.at(a, b, f + 2) = tags[a][2];
        }
    }
    for (double v : out.data)
        if (!std::isfinite(v)) throw DomainError("non-finite feature value produced");
    return out;
}

std::vector<std::string> feature_column_names(const BlockSpec& spec) {
    std::vector<std::string> names;
    for (const auto& def : spec.features) {
        const size_t w = feature_width(def, spec.block_length);
        if (w == 1) {
            names.push_back(feature_name(def));
        } else {
            for (size_t k = 0; k < w; ++k)
                names.push_back(feature_name(def) + "[" + std::to_string(k) + "]");
        }
    }
    names.push_back("tag_location");
    names.push_back("tag_sensor");
    names.push_back("tag_axis");
    return names;
}

}  // namespace rtsf::tsf
