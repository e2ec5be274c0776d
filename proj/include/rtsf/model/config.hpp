#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rtsf/common.hpp"
#include "rtsf/rot/triads.hpp"
#include "rtsf/tsf/engine.hpp"

namespace rtsf::model {

// The 29 numeric hyperparameters (head count + 14 base-kernel and 14 depth
// slots) plus the structural settings of a run. Slots 1..7 parameterise the
// rotation-parameter path, slots 8..14 the mirrored classification path:
//   1/8   mixer main axis-wise MLP        2/9   mixer final MLP
//   3/10  axis-gate sub-block axis MLP    4/11  axis-gate sub-block final MLP
//   5/12  channel-gate sub-block axis MLP 6/13  channel-gate sub-block final MLP
//   7/14  post-serialisation MLP before the output FC layer
struct ModelConfig {
    uint64_t seed = 42;
    size_t class_count = 0;
    size_t heads = 4;
    std::array<size_t, 14> base_kernels{};
    std::array<size_t, 14> depths{};
    bool meta_tying = false;
    double leaky_slope = 0.3;
    double dropout = 0.5;
    bool hard_gates = false;
    bool disable_rotation = false;
    size_t segment_length = 0;
    std::vector<tsf::BlockSpec> block_sets;
    std::vector<rot::ChannelInfo> channels;

    size_t bk(size_t slot) const { return base_kernels[slot - 1]; }
    size_t d(size_t slot) const { return depths[slot - 1]; }
};

// Feature ids extracted per block when a block set does not name its own.
std::vector<tsf::FeatureDef> default_feature_selection();

ModelConfig parse_model_config(const std::string& json_text);
ModelConfig load_model_config(const std::string& path);

// Canonical serialisation (sorted keys); hashing this pins a run's identity.
std::string canonical_config_json(const ModelConfig& cfg);

// Throws ConfigError naming the violated constraint.
void validate_config(const ModelConfig& cfg);

// Small everything-enabled configuration for gradient checking: 2 heads,
// width-8 single-stage blocks, 16-sample segments over two triads, 3 classes.
ModelConfig tiny_test_config();

}  // namespace rtsf::model
