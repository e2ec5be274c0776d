#include "rtsf/rot/rodrigues.hpp"

#include <cmath>

namespace rtsf::rot {

namespace {

Mat3 skew(const Vec3& v) {
    return Mat3{{{0.0, -v[2], v[1]}, {v[2], 0.0, -v[0]}, {-v[1], v[0], 0.0}}};
}

Mat3 add(const Mat3& a, const Mat3& b) {
    Mat3 c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c[i][j] = a[i][j] + b[i][j];
    return c;
}

Mat3 scale(const Mat3& a, double s) {
    Mat3 c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c[i][j] = a[i][j] * s;
    return c;
}

struct UnitAxis {
    Vec3 k;
    double norm;
    bool degenerate;
};

UnitAxis unit_axis(const Vec3& a) {
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    if (n < kDegenerateAxisNorm) return {{0.0, 0.0, 1.0}, n, true};
    return {{a[0] / n, a[1] / n, a[2] / n}, n, false};
}

}  // namespace

Mat3 identity3() {
    return Mat3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int l = 0; l < 3; ++l) s += a[i][l] * b[l][j];
            c[i][j] = s;
        }
    return c;
}

Vec3 apply(const Mat3& r, const Vec3& v) {
    Vec3 out{};
    for (int i = 0; i < 3; ++i)
        out[i] = r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2];
    return out;
}

double det3(const Mat3& r) {
    return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
           r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
           r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
}

Mat3 rodrigues_matrix(const RotationParams& p) {
    const auto ua = unit_axis(p.axis);
    const double theta = p.angle_raw * M_PI;
    const Mat3 k = skew(ua.k);
    const Mat3 k2 = matmul(k, k);
    Mat3 r = identity3();
    r = add(r, scale(k, std::sin(theta)));
    r = add(r, scale(k2, 1.0 - std::cos(theta)));
    return r;
}

std::array<Mat3, 4> rodrigues_jacobian(const RotationParams& p) {
    std::array<Mat3, 4> jac{};
    const auto ua = unit_axis(p.axis);
    const double theta = p.angle_raw * M_PI;
    const double st = std::sin(theta), ct = std::cos(theta);
    const Mat3 k = skew(ua.k);
    const Mat3 k2 = matmul(k, k);

    // dR/d angle_raw = pi * (cos(theta) K + sin(theta) K^2)
    jac[3] = scale(add(scale(k, ct), scale(k2, st)), M_PI);

    if (ua.degenerate) return jac;  // axis gradient suppressed in the fallback

    for (int m = 0; m < 3; ++m) {
        // unit-axis sensitivity: dk/da_m = (e_m - k * k_m) / |a|
        Vec3 dk{};
        for (int i = 0; i < 3; ++i)
            dk[i] = ((i == m ? 1.0 : 0.0) - ua.k[i] * ua.k[m]) / ua.norm;
        const Mat3 dK = skew(dk);
        const Mat3 dK2 = add(matmul(dK, k), matmul(k, dK));
        jac[m] = add(scale(dK, st), scale(dK2, 1.0 - ct));
    }
    return jac;
}

std::vector<RotationParams> accumulate_head_params(const std::vector<RotationParams>& raw) {
    if (raw.empty()) throw ConfigError("head parameter list is empty");
    std::vector<RotationParams> acc(raw.size());
    Vec3 axis{0.0, 0.0, 0.0};
    double angle = 0.0;
    for (size_t h = 0; h < raw.size(); ++h) {
        for (int i = 0; i < 3; ++i) axis[i] += raw[h].axis[i];
        angle += raw[h].angle_raw;
        acc[h].axis = axis;
        acc[h].angle_raw = angle;
    }
    return acc;
}

}  // namespace rtsf::rot
