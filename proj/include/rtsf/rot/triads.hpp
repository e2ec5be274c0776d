#pragma once

#include <string>
#include <vector>

#include "rtsf/common.hpp"
#include "rtsf/rot/rodrigues.hpp"

namespace rtsf::rot {

enum class SensorType { Other = 0, Acc = 1, Gyro = 2, Mag = 3 };

enum class AxisType { Other = 0, X = 1, Y = 2, Z = 3, Norm = 4 };

struct ChannelInfo {
    std::string name;
    int location = 0;
    SensorType sensor = SensorType::Other;
    AxisType axis = AxisType::Other;
};

SensorType sensor_type_from_string(const std::string& s);
std::string to_string(SensorType t);
AxisType axis_type_from_string(const std::string& s);
std::string to_string(AxisType t);

// Which channels rotate together. Triads are disjoint channel index triples;
// the remainder is passed through untouched.
struct TriadMap {
    std::vector<std::array<size_t, 3>> triads;
    std::vector<size_t> non_rotatable;

    size_t rotatable_count() const { return triads.size() * 3; }
};

// Derives the triad map from an ordered channel list: every consecutive
// (x, y, z) run of the same rotatable sensor type and location forms a triad.
TriadMap derive_triads(const std::vector<ChannelInfo>& channels);

// Applies one rotation matrix to every triad of a segment laid out as
// channel-major rows; non-rotatable channels are copied through unchanged.
std::vector<std::vector<double>> rotate_triads(const Mat3& r,
                                               const std::vector<std::vector<double>>& segment,
                                               const TriadMap& map);

}  // namespace rtsf::rot
