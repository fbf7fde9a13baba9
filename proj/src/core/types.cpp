#include <gsopt/core/errors.hpp>
#include <gsopt/core/types.hpp>

#include <algorithm>
#include <string>

namespace gsopt {

void GaussianCloud::resize(std::size_t count) {
    positions.resize(count, Vec3::Zero());
    sizes.resize(count, Vec3::Ones());
    rotations.resize(count, Vec4(1.0, 0.0, 0.0, 0.0));
    opacity_logits.resize(count, 0.0);
    sh.resize(count * sh_stride(), 0.0);
}

std::size_t GaussianCloud::append_copy(std::size_t i) {
    if (i >= size()) {
        throw InvalidParameter("append_copy: index " + std::to_string(i) + " out of range");
    }
    positions.push_back(positions[i]);
    sizes.push_back(sizes[i]);
    rotations.push_back(rotations[i]);
    opacity_logits.push_back(opacity_logits[i]);
    const std::size_t stride = sh_stride();
    for (std::size_t k = 0; k < stride; ++k) {
        sh.push_back(sh[i * stride + k]);
    }
    return size() - 1;
}

void GaussianCloud::remove(std::span<const std::size_t> indices) {
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (!sorted.empty() && sorted.back() >= size()) {
        throw InvalidParameter("remove: index " + std::to_string(sorted.back()) + " out of range");
    }
    erase_rows(positions, sorted);
    erase_rows(sizes, sorted);
    erase_rows(rotations, sorted);
    erase_rows(opacity_logits, sorted);
    erase_rows(sh, sorted, static_cast<std::size_t>(sh_stride()));
}

void GaussianCloud::validate() const {
    const std::size_t n = size();
    if (sizes.size() != n || rotations.size() != n || opacity_logits.size() != n ||
        sh.size() != n * static_cast<std::size_t>(sh_stride())) {
        throw ConsistencyError("GaussianCloud attribute arrays have different lengths");
    }
    if (sh_degree < 0 || sh_degree > 3) {
        throw InvalidParameter("GaussianCloud: SH degree must be in [0, 3]");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!positions[i].allFinite() || !sizes[i].allFinite() || !rotations[i].allFinite() ||
            !std::isfinite(opacity_logits[i])) {
            throw InvalidParameter("GaussianCloud: non-finite attribute at index " + std::to_string(i));
        }
        if ((sizes[i].array() <= 0.0).any()) {
            throw InvalidParameter("GaussianCloud: non-positive size at index " + std::to_string(i));
        }
    }
}

Mat4 Camera::world_to_camera() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

void Camera::set_world_to_camera(const Mat4 &m) {
    rotation = m.topLeftCorner<3, 3>();
    translation = m.topRightCorner<3, 1>();
}

Camera Camera::look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, int width, int height,
                       double focal) {
    const Vec3 forward = (target - eye).normalized();
    // Image y points down, so the camera's y axis is the negated world up projected off the view axis.
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) {
        throw InvalidParameter("Camera::look_at: up vector parallel to view direction");
    }
    right.normalize();
    const Vec3 down = forward.cross(right);

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

} // namespace gsopt
