#include <gsopt/core/errors.hpp>
#include <gsopt/core/sh.hpp>

#include <algorithm>

namespace gsopt {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                           -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw InvalidParameter("SH degree must be in [0, 3]");
    }
}

Vec3 unit_direction(const Vec3 &v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw InvalidParameter("eval_sh: view direction must be finite and non-zero");
    }
    return v / n;
}

} // namespace

void sh_basis_with_gradient(const Vec3 &dir, int degree, std::array<double, kMaxShBasis> &y,
                            std::array<Vec3, kMaxShBasis> &dy) {
    check_degree(degree);
    const double x = dir.x(), yv = dir.y(), z = dir.z();
    const double xx = x * x, yy = yv * yv, zz = z * z;

    y[0] = kShC0;
    dy[0] = Vec3::Zero();
    if (degree < 1) {
        return;
    }
    y[1] = -kC1 * yv;
    dy[1] = Vec3(0.0, -kC1, 0.0);
    y[2] = kC1 * z;
    dy[2] = Vec3(0.0, 0.0, kC1);
    y[3] = -kC1 * x;
    dy[3] = Vec3(-kC1, 0.0, 0.0);
    if (degree < 2) {
        return;
    }
    y[4] = kC2[0] * x * yv;
    dy[4] = kC2[0] * Vec3(yv, x, 0.0);
    y[5] = kC2[1] * yv * z;
    dy[5] = kC2[1] * Vec3(0.0, z, yv);
    y[6] = kC2[2] * (2.0 * zz - xx - yy);
    dy[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * yv, 4.0 * z);
    y[7] = kC2[3] * x * z;
    dy[7] = kC2[3] * Vec3(z, 0.0, x);
    y[8] = kC2[4] * (xx - yy);
    dy[8] = kC2[4] * Vec3(2.0 * x, -2.0 * yv, 0.0);
    if (degree < 3) {
        return;
    }
    y[9] = kC3[0] * yv * (3.0 * xx - yy);
    dy[9] = kC3[0] * Vec3(6.0 * x * yv, 3.0 * xx - 3.0 * yy, 0.0);
    y[10] = kC3[1] * x * yv * z;
    dy[10] = kC3[1] * Vec3(yv * z, x * z, x * yv);
    y[11] = kC3[2] * yv * (4.0 * zz - xx - yy);
    dy[11] = kC3[2] * Vec3(-2.0 * x * yv, 4.0 * zz - xx - 3.0 * yy, 8.0 * yv * z);
    y[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    dy[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * yv * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    y[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    dy[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * yv, 8.0 * x * z);
    y[14] = kC3[5] * z * (xx - yy);
    dy[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * yv * z, xx - yy);
    y[15] = kC3[6] * x * (xx - 3.0 * yy);
    dy[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * yv, 0.0);
}

std::array<double, kMaxShBasis> sh_basis_values(const Vec3 &dir, int degree) {
    std::array<double, kMaxShBasis> values{};
    std::array<Vec3, kMaxShBasis> unused;
    sh_basis_with_gradient(dir, degree, values, unused);
    return values;
}

ShColor eval_sh(std::span<const double> coeffs, const Vec3 &view_direction, int degree) {
    check_degree(degree);
    const int basis = sh_basis_count(degree);
    if (coeffs.size() != static_cast<std::size_t>(3 * basis)) {
        throw InvalidParameter("eval_sh: coefficient count does not match degree");
    }
    ShColor out;
    // Degree 0 is direction independent, but a zero direction is still rejected.
    const auto y = sh_basis_values(unit_direction(view_direction), degree);
    for (int ch = 0; ch < 3; ++ch) {
        double v = 0.5;
        for (int k = 0; k < basis; ++k) {
            v += y[k] * coeffs[k * 3 + ch];
        }
        out.clamped[ch] = v < 0.0 || v > 1.0;
        out.rgb[ch] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Vec3 eval_sh_backward(std::span<const double> coeffs, const Vec3 &view_direction, int degree,
                      const ShColor &color, const Vec3 &grad_rgb, std::span<double> grad_coeffs) {
    const int basis = sh_basis_count(degree);
    const double n = view_direction.norm();
    const Vec3 dir = unit_direction(view_direction);
    std::array<double, kMaxShBasis> y{};
    std::array<Vec3, kMaxShBasis> dy;
    sh_basis_with_gradient(dir, degree, y, dy);

    Vec3 grad_dir = Vec3::Zero();
    for (int ch = 0; ch < 3; ++ch) {
        if (color.clamped[ch]) {
            continue;
        }
        const double g = grad_rgb[ch];
        for (int k = 0; k < basis; ++k) {
            grad_coeffs[k * 3 + ch] += g * y[k];
            grad_dir += (g * coeffs[k * 3 + ch]) * dy[k];
        }
    }
    return (grad_dir - dir * dir.dot(grad_dir)) / n;
}

} // namespace gsopt
