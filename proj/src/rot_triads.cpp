#include "rtsf/rot/triads.hpp"

#include <algorithm>

namespace rtsf::rot {

SensorType sensor_type_from_string(const std::string& s) {
    if (s == "acc") return SensorType::Acc;
    if (s == "gyro") return SensorType::Gyro;
    if (s == "mag") return SensorType::Mag;
    if (s == "other") return SensorType::Other;
    throw ConfigError("unknown sensor type: " + s);
}

std::string to_string(SensorType t) {
    switch (t) {
        case SensorType::Acc: return "acc";
        case SensorType::Gyro: return "gyro";
        case SensorType::Mag: return "mag";
        case SensorType::Other: return "other";
    }
    return "other";
}

AxisType axis_type_from_string(const std::string& s) {
    if (s == "x") return AxisType::X;
    if (s == "y") return AxisType::Y;
    if (s == "z") return AxisType::Z;
    if (s == "norm") return AxisType::Norm;
    if (s == "other") return AxisType::Other;
    throw ConfigError("unknown axis type: " + s);
}

std::string to_string(AxisType t) {
    switch (t) {
        case AxisType::X: return "x";
        case AxisType::Y: return "y";
        case AxisType::Z: return "z";
        case AxisType::Norm: return "norm";
        case AxisType::Other: return "other";
    }
    return "other";
}

TriadMap derive_triads(const std::vector<ChannelInfo>& channels) {
    TriadMap map;
    std::vector<bool> used(channels.size(), false);
    for (size_t i = 0; i + 2 < channels.size(); ++i) {
        const auto& a = channels[i];
        const auto& b = channels[i + 1];
        const auto& c = channels[i + 2];
        const bool rotatable = a.sensor != SensorType::Other;
        if (rotatable && a.axis == AxisType::X && b.axis == AxisType::Y &&
            c.axis == AxisType::Z && b.sensor == a.sensor && c.sensor == a.sensor &&
            b.location == a.location && c.location == a.location && !used[i]) {
            map.triads.push_back({i, i + 1, i + 2});
            used[i] = used[i + 1] = used[i + 2] = true;
        }
    }
    for (size_t i = 0; i < channels.size(); ++i)
        if (!used[i]) map.non_rotatable.push_back(i);
    return map;
}

std::vector<std::vector<double>> rotate_triads(const Mat3& r,
                                               const std::vector<std::vector<double>>& segment,
                                               const TriadMap& map) {
    for (const auto& t : map.triads)
        for (size_t idx : t)
            if (idx >= segment.size())
                throw ConfigError("triad map references channel beyond segment");
    auto out = segment;
    for (const auto& t : map.triads) {
        const auto& x = segment[t[0]];
        const auto& y = segment[t[1]];
        const auto& z = segment[t[2]];
        if (x.size() != y.size() || y.size() != z.size())
            throw ConfigError("triad channels have different lengths");
        for (size_t i = 0; i < x.size(); ++i) {
            const Vec3 v{x[i], y[i], z[i]};
            const Vec3 w = apply(r, v);
            out[t[0]][i] = w[0];
            out[t[1]][i] = w[1];
            out[t[2]][i] = w[2];
        }
    }
    return out;
}

}  // namespace rtsf::rot
