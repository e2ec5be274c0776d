#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rtsf {

// Error taxonomy used across the library. The CLI maps each class to a
// stable diagnostic prefix and a nonzero exit code.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Invalid configuration: bad hyperparameters, malformed specs, shape
// mismatches between declared layouts and data.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("E_CONFIG", msg) {}
};

// Mathematically undefined request (empty series, no valid lag, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("E_DOMAIN", msg) {}
};

// Caller misuse of an API or command (missing checkpoint, non-scalar loss).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error("E_USAGE", msg) {}
};

// Problems with external inputs: missing dataset files, malformed rows.
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error("E_INPUT", msg) {}
};

// Derives a stream-specific seed from a run seed so independent consumers
// (init, shuffling, dropout) never share a generator state.
inline uint64_t seed_stream(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace rtsf
