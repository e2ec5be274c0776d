#pragma once

#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rtsf/common.hpp"

namespace rtsf::nn {

// Dense row-major tensor storage.
template <typename T>
struct Array {
    std::vector<size_t> shape;
    std::vector<T> v;

    Array() = default;
    explicit Array(std::vector<size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), T(0));
    }
    Array(std::vector<size_t> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (v.size() != count(shape)) throw ConfigError("array data does not match shape");
    }

    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    size_t size() const { return v.size(); }
    size_t rank() const { return shape.size(); }
    size_t dim(size_t i) const { return shape[i]; }

    static Array zeros(std::vector<size_t> s) { return Array(std::move(s)); }
    static Array full(std::vector<size_t> s, T value) {
        Array a(std::move(s));
        std::fill(a.v.begin(), a.v.end(), value);
        return a;
    }
    static Array scalar(T value) { return Array({1}, {value}); }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

// Glorot/fan-balanced uniform init used for all affine weights.
template <typename T>
Array<T> glorot_uniform(std::vector<size_t> shape, size_t fan_in, size_t fan_out,
                        std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Array<T> a(std::move(shape));
    for (auto& x : a.v) x = static_cast<T>(dist(rng));
    return a;
}

}  // namespace rtsf::nn
