#pragma once

// Axis-angle rotations for sensor triads. Parameters arrive as squashed
// 4-vectors (axis x/y/z + raw angle); the axis is renormalised to unit length
// and the angle maps to theta = raw * pi. Analytic derivatives of the matrix
// with respect to the raw parameters back the differentiable rotation
// operator.

#include <array>
#include <cstddef>
#include <vector>

#include "rtsf/common.hpp"

namespace rtsf::rot {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

// Axis below this norm falls back to the fixed axis (0,0,1) with zero
// gradient through the substitution.
inline constexpr double kDegenerateAxisNorm = 1e-8;

struct RotationParams {
    Vec3 axis{0.0, 0.0, 0.0};
    double angle_raw = 0.0;
};

Mat3 identity3();
Mat3 matmul(const Mat3& a, const Mat3& b);
Vec3 apply(const Mat3& r, const Vec3& v);
double det3(const Mat3& r);

Mat3 rodrigues_matrix(const RotationParams& p);

// d R / d raw parameter, in order (axis_x, axis_y, axis_z, angle_raw).
// Inside the degenerate-axis fallback region the three axis derivatives are
// zero by construction.
std::array<Mat3, 4> rodrigues_jacobian(const RotationParams& p);

// Head m uses the running sum of the raw 4-vectors of heads 1..m.
std::vector<RotationParams> accumulate_head_params(const std::vector<RotationParams>& raw);

}  // namespace rtsf::rot
