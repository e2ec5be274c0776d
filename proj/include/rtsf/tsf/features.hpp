#pragma once

// Time-series feature kernels. Every feature of the catalog is computed by
// eval_feature(); grad_feature() accumulates the adjoint of a feature with
// respect to the window samples, which is what lets feature extraction sit
// inside a differentiable graph. Counting features are piecewise constant in
// the input, so their adjoint is identically zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rtsf/common.hpp"

namespace rtsf::tsf {

// Catalog identifiers. Ids 1..49; ids 34/35/44 are spectrum-valued and expand
// to floor(n/2)+1 entries, everything else is a scalar.
enum FeatureId : int {
    kMean = 1,
    kMin = 2,
    kMax = 3,
    kQuantile = 4,  // parameterised: value- or time-based, level in {.25,.5,.75}
    kSkewness = 5,
    kKurtosis = 6,
    kVariance = 7,
    kStdDev = 8,
    kRms = 9,
    kMeanChange = 10,
    kSumChange = 11,
    kMeanAbsChange = 12,
    kAbsEnergy = 13,
    kAbsSumChanges = 14,
    kAbsMax = 15,
    kCid = 16,
    kCountAboveZero = 17,
    kCountAboveMean = 18,
    kCountAboveStart = 19,
    kCountAboveT25 = 20,
    kCountAboveT50 = 21,
    kCountAboveT75 = 22,
    kCountAboveEnd = 23,
    kCrossZero = 24,
    kCrossMean = 25,
    kCrossQ1 = 26,
    kCrossQ2 = 27,
    kCrossQ3 = 28,
    kCrossStart = 29,
    kCrossT25 = 30,
    kCrossT50 = 31,
    kCrossT75 = 32,
    kCrossEnd = 33,
    kFftAmplitude = 34,
    kFftAmplitudeRatio = 35,
    kFftAmpMean = 36,
    kFftAmpVariance = 37,
    kFftAmpSkewness = 38,
    kFftAmpKurtosis = 39,
    kFftRatioMean = 40,
    kFftRatioVariance = 41,
    kFftRatioSkewness = 42,
    kFftRatioKurtosis = 43,
    kFftAngle = 44,
    kAutocorrelation = 45,  // parameterised by lag
    kAcMean = 46,           // stats over lags step, 2*step, ... <= n/2
    kAcVariance = 47,
    kAcSkewness = 48,
    kAcKurtosis = 49,
};

enum class QuantKind { Value, Time };

struct FeatureDef {
    int id = 0;
    QuantKind qkind = QuantKind::Value;  // id 4 only
    double level = 0.5;                  // id 4 only
    int lag = 1;                         // id 45 only
    int step = 1;                        // ids 46-49 only
};

inline bool is_spectrum_feature(int id) {
    return id == kFftAmplitude || id == kFftAmplitudeRatio || id == kFftAngle;
}

inline bool needs_pairs(int id) {
    switch (id) {
        case kMeanChange:
        case kSumChange:
        case kMeanAbsChange:
        case kAbsSumChanges:
        case kCid:
            return true;
        default:
            return false;
    }
}

inline size_t spectrum_bins(size_t n) { return n / 2 + 1; }

// Number of values a definition contributes for a window of length n.
inline size_t feature_width(const FeatureDef& def, size_t n) {
    return is_spectrum_feature(def.id) ? spectrum_bins(n) : 1;
}

inline size_t selection_width(std::span<const FeatureDef> defs, size_t n) {
    size_t w = 0;
    for (const auto& d : defs) w += feature_width(d, n);
    return w;
}

// Index of the sample sitting at fraction p of the window, nearest-sample.
inline size_t time_position_index(double p, size_t n) {
    long long i = std::llround(p * static_cast<double>(n - 1));
    if (i < 0) i = 0;
    if (i >= static_cast<long long>(n)) i = static_cast<long long>(n) - 1;
    return static_cast<size_t>(i);
}

void validate_feature_def(const FeatureDef& def, size_t window_len);
std::string feature_name(const FeatureDef& def);
std::vector<FeatureDef> parse_selection_line(const std::string& line);
std::vector<FeatureDef> parse_selection_file(const std::string& path);

namespace detail {

template <typename T>
struct Moments {
    T mean = 0, m2 = 0, m3 = 0, m4 = 0;
    bool constant = false;
};

template <typename T>
Moments<T> central_moments(std::span<const T> v) {
    Moments<T> m;
    const size_t n = v.size();
    T s = 0;
    T lo = v[0], hi = v[0];
    for (T x : v) {
        s += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    m.mean = s / static_cast<T>(n);
    m.constant = (lo == hi);
    if (m.constant) return m;
    T s2 = 0, s3 = 0, s4 = 0;
    for (T x : v) {
        const T c = x - m.mean;
        const T c2 = c * c;
        s2 += c2;
        s3 += c2 * c;
        s4 += c2 * c2;
    }
    m.m2 = s2 / static_cast<T>(n);
    m.m3 = s3 / static_cast<T>(n);
    m.m4 = s4 / static_cast<T>(n);
    return m;
}

enum class VecStat { Mean, Variance, Skewness, Kurtosis };

template <typename T>
T vec_stat(VecStat which, std::span<const T> v) {
    const auto m = central_moments(v);
    switch (which) {
        case VecStat::Mean:
            return m.mean;
        case VecStat::Variance:
            return m.constant ? T(0) : m.m2;
        case VecStat::Skewness:
            return (m.constant || m.m2 <= T(0)) ? T(0) : m.m3 / std::pow(m.m2, T(1.5));
        case VecStat::Kurtosis:
            return (m.constant || m.m2 <= T(0)) ? T(0) : m.m4 / (m.m2 * m.m2) - T(3);
    }
    return T(0);
}

// d(stat)/d(v_i), accumulated into vbar with upstream factor g.
template <typename T>
void vec_stat_grad(VecStat which, std::span<const T> v, T g, std::span<T> vbar) {
    const size_t n = v.size();
    const auto m = central_moments(v);
    const T invn = T(1) / static_cast<T>(n);
    switch (which) {
        case VecStat::Mean:
            for (size_t i = 0; i < n; ++i) vbar[i] += g * invn;
            return;
        case VecStat::Variance: {
            if (m.constant) return;
            for (size_t i = 0; i < n; ++i) vbar[i] += g * T(2) * invn * (v[i] - m.mean);
            return;
        }
        case VecStat::Skewness: {
            if (m.constant || m.m2 <= T(0)) return;
            const T p32 = std::pow(m.m2, T(1.5));
            const T p52 = p32 * m.m2;
            for (size_t i = 0; i < n; ++i) {
                const T c = v[i] - m.mean;
                vbar[i] += g * T(3) * invn * ((c * c - m.m2) / p32 - m.m3 * c / p52);
            }
            return;
        }
        case VecStat::Kurtosis: {
            if (m.constant || m.m2 <= T(0)) return;
            const T m2sq = m.m2 * m.m2;
            for (size_t i = 0; i < n; ++i) {
                const T c = v[i] - m.mean;
                vbar[i] += g * T(4) * invn * ((c * c * c - m.m3) / m2sq - m.m4 * c / (m2sq * m.m2));
            }
            return;
        }
    }
}

}  // namespace detail

// Per-window evaluation context. Caches the expensive intermediates (sorted
// order, spectrum, autocorrelation sequence) across the features of one
// window. Not thread-safe; use one context per worker.
template <typename T>
class WindowContext {
public:
    explicit WindowContext(std::span<const T> x) : x_(x) {
        if (x.empty()) throw DomainError("feature window is empty");
    }

    std::span<const T> x() const { return x_; }
    size_t n() const { return x_.size(); }

    const detail::Moments<T>& moments() {
        if (!have_moments_) {
            mom_ = detail::central_moments(x_);
            have_moments_ = true;
        }
        return mom_;
    }

    // Ascending order of sample indices (stable); sorted_[r] = x[order_[r]].
    const std::vector<T>& sorted() {
        ensure_sorted();
        return sorted_;
    }
    const std::vector<size_t>& sort_order() {
        ensure_sorted();
        return order_;
    }

    // Linear interpolation between order statistics.
    T quantile(T p) {
        ensure_sorted();
        const size_t n = x_.size();
        if (n == 1) return sorted_[0];
        const T h = p * static_cast<T>(n - 1);
        size_t lo = static_cast<size_t>(h);
        if (lo >= n - 1) lo = n - 2;
        const T w = h - static_cast<T>(lo);
        return sorted_[lo] + w * (sorted_[lo + 1] - sorted_[lo]);
    }

    // Adjoint of quantile(): routed to the two order statistics involved.
    void quantile_grad(T p, T g, std::span<T> xbar) {
        ensure_sorted();
        const size_t n = x_.size();
        if (n == 1) {
            xbar[order_[0]] += g;
            return;
        }
        const T h = p * static_cast<T>(n - 1);
        size_t lo = static_cast<size_t>(h);
        if (lo >= n - 1) lo = n - 2;
        const T w = h - static_cast<T>(lo);
        xbar[order_[lo]] += g * (T(1) - w);
        xbar[order_[lo + 1]] += g * w;
    }

    // One-sided spectrum of the window. re/im are the DFT output, amp the
    // magnitudes; all have spectrum_bins(n) entries.
    void ensure_spectrum() {
        if (have_spectrum_) return;
        const size_t n = x_.size();
        const size_t bins = spectrum_bins(n);
        cosn_.resize(n);
        sinn_.resize(n);
        const T two_pi_over_n = T(2) * static_cast<T>(M_PI) / static_cast<T>(n);
        for (size_t j = 0; j < n; ++j) {
            cosn_[j] = std::cos(two_pi_over_n * static_cast<T>(j));
            sinn_[j] = std::sin(two_pi_over_n * static_cast<T>(j));
        }
        re_.assign(bins, T(0));
        im_.assign(bins, T(0));
        amp_.assign(bins, T(0));
        for (size_t k = 0; k < bins; ++k) {
            T re = 0, im = 0;
            size_t idx = 0;  // (j*k) mod n without overflow
            for (size_t j = 0; j < n; ++j) {
                re += x_[j] * cosn_[idx];
                im -= x_[j] * sinn_[idx];
                idx += k;
                if (idx >= n) idx -= n;
            }
            re_[k] = re;
            im_[k] = im;
            amp_[k] = std::hypot(re, im);
        }
        amp_sum_ = std::accumulate(amp_.begin(), amp_.end(), T(0));
        have_spectrum_ = true;
    }
    const std::vector<T>& amplitude() {
        ensure_spectrum();
        return amp_;
    }
    std::vector<T> amplitude_ratio() {
        ensure_spectrum();
        std::vector<T> r(amp_.size(), T(0));
        if (amp_sum_ > T(0))
            for (size_t k = 0; k < r.size(); ++k) r[k] = amp_[k] / amp_sum_;
        return r;
    }
    // Phase spectrum. Bins with numerically-zero amplitude have no defined
    // phase and report 0; numerically-real bins snap to 0 or pi so rounding
    // in the imaginary residue cannot flip the branch.
    std::vector<T> angle() {
        ensure_spectrum();
        std::vector<T> a(amp_.size());
        const T amp_eps = amplitude_epsilon();
        for (size_t k = 0; k < a.size(); ++k) {
            if (amp_[k] <= amp_eps)
                a[k] = T(0);
            else if (std::abs(im_[k]) <= T(1e-9) * amp_[k])
                a[k] = re_[k] < T(0) ? static_cast<T>(M_PI) : T(0);
            else
                a[k] = std::atan2(im_[k], re_[k]);
        }
        return a;
    }

    // Accumulates (d amp / d x)^T * abar into xbar.
    void amplitude_grad(std::span<const T> abar, std::span<T> xbar) {
        ensure_spectrum();
        const size_t n = x_.size();
        for (size_t k = 0; k < amp_.size(); ++k) {
            if (abar[k] == T(0) || amp_[k] <= T(0)) continue;
            const T gr = abar[k] * re_[k] / amp_[k];
            const T gi = abar[k] * im_[k] / amp_[k];
            size_t idx = 0;
            for (size_t j = 0; j < n; ++j) {
                xbar[j] += gr * cosn_[idx] - gi * sinn_[idx];
                idx += k;
                if (idx >= n) idx -= n;
            }
        }
    }

    // Accumulates (d ratio / d x)^T * rbar into xbar via the amplitude chain.
    void ratio_grad(std::span<const T> rbar, std::span<T> xbar) {
        ensure_spectrum();
        if (amp_sum_ <= T(0)) return;
        const size_t bins = amp_.size();
        T dot = 0;
        for (size_t k = 0; k < bins; ++k) dot += rbar[k] * amp_[k] / amp_sum_;
        std::vector<T> abar(bins);
        for (size_t k = 0; k < bins; ++k) abar[k] = (rbar[k] - dot) / amp_sum_;
        amplitude_grad(abar, xbar);
    }

    void angle_grad(std::span<const T> pbar, std::span<T> xbar) {
        ensure_spectrum();
        const size_t n = x_.size();
        const T amp_eps = amplitude_epsilon();
        for (size_t k = 0; k < amp_.size(); ++k) {
            if (pbar[k] == T(0) || amp_[k] <= amp_eps) continue;
            if (std::abs(im_[k]) <= T(1e-9) * amp_[k]) continue;  // snapped bin
            const T denom = amp_[k] * amp_[k];
            size_t idx = 0;
            for (size_t j = 0; j < n; ++j) {
                // d atan2(im, re) / dx_j with d re = cos, d im = -sin
                xbar[j] += pbar[k] * (-re_[k] * sinn_[idx] - im_[k] * cosn_[idx]) / denom;
                idx += k;
                if (idx >= n) idx -= n;
            }
        }
    }

    size_t max_lag() const { return x_.size() / 2; }

    // Normalised autocorrelation at the given lag; zero-variance convention
    // returns 0, lag 0 returns 1 for non-constant input.
    T autocorr(size_t lag) {
        const auto& m = moments();
        if (m.constant || m.m2 <= T(0)) return T(0);
        const size_t n = x_.size();
        T s = 0;
        for (size_t t = 0; t + lag < n; ++t)
            s += (x_[t] - m.mean) * (x_[t + lag] - m.mean);
        return s / (static_cast<T>(n - lag) * m.m2);
    }

    void autocorr_grad(size_t lag, T g, std::span<T> xbar) {
        const auto& m = moments();
        if (m.constant || m.m2 <= T(0)) return;
        const size_t n = x_.size();
        const T invn = T(1) / static_cast<T>(n);
        T s = 0, head = 0, tail = 0;
        for (size_t t = 0; t + lag < n; ++t) {
            const T a = x_[t] - m.mean;
            const T b = x_[t + lag] - m.mean;
            s += a * b;
            head += a;
            tail += b;
        }
        const T d = static_cast<T>(n - lag) * m.m2;
        for (size_t i = 0; i < n; ++i) {
            T ds = -(head + tail) * invn;
            if (i + lag < n) ds += x_[i + lag] - m.mean;
            if (i >= lag) ds += x_[i - lag] - m.mean;
            const T dd = static_cast<T>(n - lag) * T(2) * invn * (x_[i] - m.mean);
            xbar[i] += g * (ds * d - s * dd) / (d * d);
        }
    }

    std::vector<T> autocorr_sequence(size_t step) {
        if (step == 0) throw ConfigError("autocorrelation lag step must be >= 1");
        std::vector<T> vals;
        for (size_t lag = step; lag <= max_lag(); lag += step) vals.push_back(autocorr(lag));
        return vals;
    }

private:
    // Magnitudes at or below this are rounding residue, not signal.
    T amplitude_epsilon() const {
        T peak = 0;
        for (T v : x_) peak = std::max(peak, std::abs(v));
        return T(1e-12) * static_cast<T>(x_.size()) * peak;
    }

    void ensure_sorted() {
        if (have_sorted_) return;
        const size_t n = x_.size();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), size_t{0});
        std::stable_sort(order_.begin(), order_.end(),
                         [&](size_t a, size_t b) { return x_[a] < x_[b]; });
        sorted_.resize(n);
        for (size_t r = 0; r < n; ++r) sorted_[r] = x_[order_[r]];
        have_sorted_ = true;
    }

    std::span<const T> x_;
    bool have_moments_ = false;
    detail::Moments<T> mom_;
    bool have_sorted_ = false;
    std::vector<T> sorted_;
    std::vector<size_t> order_;
    bool have_spectrum_ = false;
    std::vector<T> cosn_, sinn_, re_, im_, amp_;
    T amp_sum_ = 0;
};

namespace detail {

template <typename T>
T resolve_threshold(WindowContext<T>& ctx, int id) {
    std::span<const T> x = ctx.x();
    const size_t n = x.size();
    switch (id) {
        case kCountAboveZero:
        case kCrossZero:
            return T(0);
        case kCountAboveMean:
        case kCrossMean:
            return ctx.moments().mean;
        case kCrossQ1:
            return ctx.quantile(T(0.25));
        case kCrossQ2:
            return ctx.quantile(T(0.5));
        case kCrossQ3:
            return ctx.quantile(T(0.75));
        case kCountAboveStart:
        case kCrossStart:
            return x[0];
        case kCountAboveEnd:
        case kCrossEnd:
            return x[n - 1];
        case kCountAboveT25:
        case kCrossT25:
            return x[time_position_index(0.25, n)];
        case kCountAboveT50:
        case kCrossT50:
            return x[time_position_index(0.50, n)];
        case kCountAboveT75:
        case kCrossT75:
            return x[time_position_index(0.75, n)];
        default:
            throw ConfigError("not a threshold feature id: " + std::to_string(id));
    }
}

template <typename T>
T count_above(std::span<const T> x, T thr) {
    size_t c = 0;
    for (T v : x)
        if (v > thr) ++c;
    return static_cast<T>(c);
}

// Number of transitions of the predicate (x > thr) between consecutive
// samples; samples equal to the threshold side with "not above".
template <typename T>
T crossings(std::span<const T> x, T thr) {
    size_t c = 0;
    for (size_t i = 1; i < x.size(); ++i)
        if ((x[i] > thr) != (x[i - 1] > thr)) ++c;
    return static_cast<T>(c);
}

}  // namespace detail

// Writes feature_width(def, n) values to out. The definition must have been
// validated against this window length (see validate_feature_def).
template <typename T>
void eval_feature(WindowContext<T>& ctx, const FeatureDef& def, T* out) {
    std::span<const T> x = ctx.x();
    const size_t n = x.size();
    using detail::VecStat;
    switch (def.id) {
        case kMean:
            *out = ctx.moments().mean;
            return;
        case kMin:
            *out = *std::min_element(x.begin(), x.end());
            return;
        case kMax:
            *out = *std::max_element(x.begin(), x.end());
            return;
        case kQuantile:
            *out = def.qkind == QuantKind::Value
                       ? ctx.quantile(static_cast<T>(def.level))
                       : x[time_position_index(def.level, n)];
            return;
        case kSkewness:
            *out = detail::vec_stat(VecStat::Skewness, x);
            return;
        case kKurtosis:
            *out = detail::vec_stat(VecStat::Kurtosis, x);
            return;
        case kVariance:
            *out = ctx.moments().constant ? T(0) : ctx.moments().m2;
            return;
        case kStdDev:
            *out = ctx.moments().constant ? T(0) : std::sqrt(ctx.moments().m2);
            return;
        case kRms: {
            T s = 0;
            for (T v : x) s += v * v;
            *out = std::sqrt(s / static_cast<T>(n));
            return;
        }
        case kMeanChange:
        case kSumChange: {
            const T s = x[n - 1] - x[0];  // the change sum telescopes
            *out = def.id == kMeanChange ? s / static_cast<T>(n) : s;
            return;
        }
        case kMeanAbsChange:
        case kAbsSumChanges: {
            T s = 0;
            for (size_t i = 1; i < n; ++i) s += std::abs(x[i] - x[i - 1]);
            *out = def.id == kMeanAbsChange ? s / static_cast<T>(n) : s;
            return;
        }
        case kAbsEnergy: {
            T s = 0;
            for (T v : x) s += v * v;
            *out = s;
            return;
        }
        case kAbsMax: {
            T m = 0;
            for (T v : x) m = std::max(m, std::abs(v));
            *out = m;
            return;
        }
        case kCid: {
            T s = 0;
            for (size_t i = 1; i < n; ++i) {
                const T d = x[i] - x[i - 1];
                s += d * d;
            }
            *out = std::sqrt(s);
            return;
        }
        case kCountAboveZero:
        case kCountAboveMean:
        case kCountAboveStart:
        case kCountAboveT25:
        case kCountAboveT50:
        case kCountAboveT75:
        case kCountAboveEnd:
            *out = detail::count_above(x, detail::resolve_threshold(ctx, def.id));
            return;
        case kCrossZero:
        case kCrossMean:
        case kCrossQ1:
        case kCrossQ2:
        case kCrossQ3:
        case kCrossStart:
        case kCrossT25:
        case kCrossT50:
        case kCrossT75:
        case kCrossEnd:
            *out = detail::crossings(x, detail::resolve_threshold(ctx, def.id));
            return;
        case kFftAmplitude: {
            const auto& a = ctx.amplitude();
            std::copy(a.begin(), a.end(), out);
            return;
        }
        case kFftAmplitudeRatio: {
            const auto r = ctx.amplitude_ratio();
            std::copy(r.begin(), r.end(), out);
            return;
        }
        case kFftAngle: {
            const auto a = ctx.angle();
            std::copy(a.begin(), a.end(), out);
            return;
        }
        case kFftAmpMean:
        case kFftAmpVariance:
        case kFftAmpSkewness:
        case kFftAmpKurtosis: {
            const auto& a = ctx.amplitude();
            *out = detail::vec_stat(static_cast<VecStat>(def.id - kFftAmpMean),
                                    std::span<const T>(a));
            return;
        }
        case kFftRatioMean:
        case kFftRatioVariance:
        case kFftRatioSkewness:
        case kFftRatioKurtosis: {
            const auto r = ctx.amplitude_ratio();
            *out = detail::vec_stat(static_cast<VecStat>(def.id - kFftRatioMean),
                                    std::span<const T>(r));
            return;
        }
        case kAutocorrelation:
            *out = ctx.autocorr(static_cast<size_t>(def.lag));
            return;
        case kAcMean:
        case kAcVariance:
        case kAcSkewness:
        case kAcKurtosis: {
            const auto vals = ctx.autocorr_sequence(static_cast<size_t>(def.step));
            if (vals.empty()) throw DomainError("no valid autocorrelation lag for window");
            *out = detail::vec_stat(static_cast<VecStat>(def.id - kAcMean),
                                    std::span<const T>(vals));
            return;
        }
        default:
            throw ConfigError("unknown feature id " + std::to_string(def.id));
    }
}

// Accumulates into xbar the adjoint of the feature values given upstream
// gradients gbar (feature_width entries). Features that are step functions of
// the input (counts, crossings) contribute nothing.
template <typename T>
void grad_feature(WindowContext<T>& ctx, const FeatureDef& def, std::span<const T> gbar,
                  std::span<T> xbar) {
    std::span<const T> x = ctx.x();
    const size_t n = x.size();
    const T g = gbar[0];
    using detail::VecStat;
    switch (def.id) {
        case kMean: {
            const T d = g / static_cast<T>(n);
            for (size_t i = 0; i < n; ++i) xbar[i] += d;
            return;
        }
        case kMin:
            xbar[static_cast<size_t>(
                std::min_element(x.begin(), x.end()) - x.begin())] += g;
            return;
        case kMax:
            xbar[static_cast<size_t>(
                std::max_element(x.begin(), x.end()) - x.begin())] += g;
            return;
        case kQuantile:
            if (def.qkind == QuantKind::Value)
                ctx.quantile_grad(static_cast<T>(def.level), g, xbar);
            else
                xbar[time_position_index(def.level, n)] += g;
            return;
        case kSkewness:
            detail::vec_stat_grad(VecStat::Skewness, x, g, xbar);
            return;
        case kKurtosis:
            detail::vec_stat_grad(VecStat::Kurtosis, x, g, xbar);
            return;
        case kVariance:
            detail::vec_stat_grad(VecStat::Variance, x, g, xbar);
            return;
        case kStdDev: {
            const auto& m = ctx.moments();
            if (m.constant || m.m2 <= T(0)) return;
            const T sd = std::sqrt(m.m2);
            for (size_t i = 0; i < n; ++i)
                xbar[i] += g * (x[i] - m.mean) / (static_cast<T>(n) * sd);
            return;
        }
        case kRms: {
            T s = 0;
            for (T v : x) s += v * v;
            const T r = std::sqrt(s / static_cast<T>(n));
            if (r <= T(0)) return;
            for (size_t i = 0; i < n; ++i) xbar[i] += g * x[i] / (static_cast<T>(n) * r);
            return;
        }
        case kMeanChange:
            xbar[n - 1] += g / static_cast<T>(n);
            xbar[0] -= g / static_cast<T>(n);
            return;
        case kSumChange:
            xbar[n - 1] += g;
            xbar[0] -= g;
            return;
        case kMeanAbsChange:
        case kAbsSumChanges: {
            const T f = def.id == kMeanAbsChange ? g / static_cast<T>(n) : g;
            for (size_t i = 1; i < n; ++i) {
                const T d = x[i] - x[i - 1];
                const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                xbar[i] += f * s;
                xbar[i - 1] -= f * s;
            }
            return;
        }
        case kAbsEnergy:
            for (size_t i = 0; i < n; ++i) xbar[i] += g * T(2) * x[i];
            return;
        case kAbsMax: {
            size_t arg = 0;
            T m = std::abs(x[0]);
            for (size_t i = 1; i < n; ++i)
                if (std::abs(x[i]) > m) {
                    m = std::abs(x[i]);
                    arg = i;
                }
            if (m > T(0)) xbar[arg] += g * (x[arg] > T(0) ? T(1) : T(-1));
            return;
        }
        case kCid: {
            T s = 0;
            for (size_t i = 1; i < n; ++i) {
                const T d = x[i] - x[i - 1];
                s += d * d;
            }
            const T c = std::sqrt(s);
            if (c <= T(0)) return;
            for (size_t i = 1; i < n; ++i) {
                const T d = (x[i] - x[i - 1]) / c;
                xbar[i] += g * d;
                xbar[i - 1] -= g * d;
            }
            return;
        }
        case kCountAboveZero:
        case kCountAboveMean:
        case kCountAboveStart:
        case kCountAboveT25:
        case kCountAboveT50:
        case kCountAboveT75:
        case kCountAboveEnd:
        case kCrossZero:
        case kCrossMean:
        case kCrossQ1:
        case kCrossQ2:
        case kCrossQ3:
        case kCrossStart:
        case kCrossT25:
        case kCrossT50:
        case kCrossT75:
        case kCrossEnd:
            return;  // piecewise constant
        case kFftAmplitude:
            ctx.amplitude_grad(gbar, xbar);
            return;
        case kFftAmplitudeRatio:
            ctx.ratio_grad(gbar, xbar);
            return;
        case kFftAngle:
            ctx.angle_grad(gbar, xbar);
            return;
        case kFftAmpMean:
        case kFftAmpVariance:
        case kFftAmpSkewness:
        case kFftAmpKurtosis: {
            const auto& a = ctx.amplitude();
            std::vector<T> abar(a.size(), T(0));
            detail::vec_stat_grad(static_cast<VecStat>(def.id - kFftAmpMean),
                                  std::span<const T>(a), g, std::span<T>(abar));
            ctx.amplitude_grad(abar, xbar);
            return;
        }
        case kFftRatioMean:
        case kFftRatioVariance:
        case kFftRatioSkewness:
        case kFftRatioKurtosis: {
            const auto r = ctx.amplitude_ratio();
            std::vector<T> rbar(r.size(), T(0));
            detail::vec_stat_grad(static_cast<VecStat>(def.id - kFftRatioMean),
                                  std::span<const T>(r), g, std::span<T>(rbar));
            ctx.ratio_grad(rbar, xbar);
            return;
        }
        case kAutocorrelation:
            ctx.autocorr_grad(static_cast<size_t>(def.lag), g, xbar);
            return;
        case kAcMean:
        case kAcVariance:
        case kAcSkewness:
        case kAcKurtosis: {
            const auto vals = ctx.autocorr_sequence(static_cast<size_t>(def.step));
            if (vals.empty()) throw DomainError("no valid autocorrelation lag for window");
            std::vector<T> vbar(vals.size(), T(0));
            detail::vec_stat_grad(static_cast<VecStat>(def.id - kAcMean),
                                  std::span<const T>(vals), g, std::span<T>(vbar));
            const size_t step = static_cast<size_t>(def.step);
            for (size_t j = 0; j < vals.size(); ++j)
                if (vbar[j] != T(0)) ctx.autocorr_grad((j + 1) * step, vbar[j], xbar);
            return;
        }
        default:
            throw ConfigError("unknown feature id " + std::to_string(def.id));
    }
}

}  // namespace rtsf::tsf
