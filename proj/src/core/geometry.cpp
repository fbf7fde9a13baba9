#include <gsopt/core/errors.hpp>
#include <gsopt/core/geometry.hpp>

#include <algorithm>
#include <numeric>

namespace gsopt {

namespace {

Mat3 unit_quaternion_to_rotation(double w, double x, double y, double z) {
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

} // namespace

Mat3 quaternion_to_rotation(const Vec4 &q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw InvalidParameter("quaternion_to_rotation: quaternion must be finite and non-zero");
    }
    const Vec4 u = q / n;
    return unit_quaternion_to_rotation(u[0], u[1], u[2], u[3]);
}

Mat3 build_covariance(const Vec3 &sizes, const Vec4 &rotation) {
    if (!sizes.allFinite() || !rotation.allFinite()) {
        throw InvalidParameter("build_covariance: non-finite input");
    }
    const Mat3 r = quaternion_to_rotation(rotation);
    const Vec3 var = sizes.cwiseProduct(sizes);
    Mat3 cov = r * var.asDiagonal() * r.transpose();
    // Exact symmetry regardless of rounding order.
    return 0.5 * (cov + cov.transpose());
}

Mat23 projection_jacobian(const Camera &camera, const Vec3 &p_cam) {
    const double inv_z = 1.0 / p_cam.z();
    const double inv_z2 = inv_z * inv_z;
    Mat23 j;
    j << camera.fx * inv_z, 0.0, -camera.fx * p_cam.x() * inv_z2,
        0.0, camera.fy * inv_z, -camera.fy * p_cam.y() * inv_z2;
    return j;
}

bool in_frustum(const Camera &camera, const Vec3 &p_cam, double near, double guard_band) {
    if (!(p_cam.z() > near)) {
        return false;
    }
    const double u = camera.fx * p_cam.x() / p_cam.z() + camera.cx;
    const double v = camera.fy * p_cam.y() / p_cam.z() + camera.cy;
    const double half_w = 0.5 * camera.width;
    const double half_h = 0.5 * camera.height;
    return std::abs(u - half_w) <= guard_band * half_w && std::abs(v - half_h) <= guard_band * half_h;
}

std::optional<Gaussian2D> project_to_2d(const Vec3 &position, const Mat3 &cov3d, const Camera &camera,
                                        double lowpass) {
    const Vec3 p_cam = camera.to_camera(position);
    if (!(p_cam.z() > kNearPlane)) {
        return std::nullopt;
    }
    const Mat23 m = projection_jacobian(camera, p_cam) * camera.rotation;
    Gaussian2D g;
    g.mean_uv = Vec2(camera.fx * p_cam.x() / p_cam.z() + camera.cx, camera.fy * p_cam.y() / p_cam.z() + camera.cy);
    Mat2 cov = m * cov3d * m.transpose();
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += lowpass;
    g.cov2d = cov;
    g.depth = p_cam.z();
    return g;
}

std::vector<std::size_t> sort_by_depth(const GaussianCloud &cloud, const Camera &camera) {
    std::vector<std::size_t> visible;
    std::vector<double> depth(cloud.size(), 0.0);
    visible.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 p_cam = camera.to_camera(cloud.positions[i]);
        if (in_frustum(camera, p_cam)) {
            depth[i] = p_cam.z();
            visible.push_back(i);
        }
    }
    std::stable_sort(visible.begin(), visible.end(),
                     [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });
    return visible;
}

Vec4 quaternion_to_rotation_vjp(const Vec4 &q, const Mat3 &g) {
    const double n = q.norm();
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];

    // Partial derivatives of each rotation entry with respect to the unit quaternion.
    Vec4 gu;
    gu[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    gu[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                   w * g(2, 1) - 2.0 * x * g(2, 2));
    gu[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                   z * g(2, 1) - 2.0 * y * g(2, 2));
    gu[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                   y * g(1, 2) + x * g(2, 0) + y * g(2, 1));

    // Through the normalization q / |q|.
    return (gu - u * u.dot(gu)) / n;
}

void build_covariance_vjp(const Vec3 &sizes, const Vec4 &rotation, const Mat3 &grad_cov, Vec3 &grad_sizes,
                          Vec4 &grad_rotation) {
    const Mat3 g = 0.5 * (grad_cov + grad_cov.transpose());
    const Mat3 r = quaternion_to_rotation(rotation);
    const Vec3 var = sizes.cwiseProduct(sizes);
    const Mat3 local = r.transpose() * g * r;
    for (int a = 0; a < 3; ++a) {
        grad_sizes[a] = 2.0 * sizes[a] * local(a, a);
    }
    const Mat3 grad_r = 2.0 * g * r * var.asDiagonal();
    grad_rotation = quaternion_to_rotation_vjp(rotation, grad_r);
}

} // namespace gsopt
