#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gsopt {

using Vec2  = Eigen::Vector2d;
using Vec3  = Eigen::Vector3d;
using Vec4  = Eigen::Vector4d;
using Mat2  = Eigen::Matrix2d;
using Mat3  = Eigen::Matrix3d;
using Mat4  = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Number of real SH basis functions up to `degree` inclusive.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// Dense row-major H x W x C image of doubles. Linear radiance in [0,1] for color images.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels = 3, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

    double &at(int x, int y, int c = 0) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Image &other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image &, const Image &) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Structure-of-arrays set of anisotropic 3D Gaussians.
///
/// Sizes are linear standard deviations along the local axes. Rotations are
/// quaternions stored as (w, x, y, z). SH coefficients are laid out
/// [gaussian][basis][channel].
struct GaussianCloud {
    int sh_degree = 1;
    std::vector<Vec3> positions;
    std::vector<Vec3> sizes;
    std::vector<Vec4> rotations;
    std::vector<double> opacity_logits;
    std::vector<double> sh;

    GaussianCloud() = default;
    explicit GaussianCloud(int degree, std::size_t count = 0) : sh_degree(degree) { resize(count); }

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    int sh_basis() const { return sh_basis_count(sh_degree); }
    int sh_stride() const { return 3 * sh_basis(); }

    double opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }

    std::span<double> sh_of(std::size_t i) {
        return {sh.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
    }
    std::span<const double> sh_of(std::size_t i) const {
        return {sh.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
    }

    /// New rows are zero-position, unit-size, identity-rotation, opacity 0.5, black.
    void resize(std::size_t count);

    /// Appends a copy of Gaussian `i` and returns the new index.
    std::size_t append_copy(std::size_t i);

    /// Removes the listed rows, keeping survivors in their relative order.
    void remove(std::span<const std::size_t> indices);

    /// Throws ConsistencyError if attribute arrays disagree in length, InvalidParameter
    /// on non-finite values or non-positive sizes.
    void validate() const;
};

/// Pinhole camera with a rigid world-to-camera transform (x right, y down, z forward).
struct Camera {
    int id = 0;
    int width = 0;
    int height = 0;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    Image gt_image;

    Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
    Vec3 center() const { return -rotation.transpose() * translation; }
    double focal() const { return 0.5 * (fx + fy); }

    Mat4 world_to_camera() const;
    void set_world_to_camera(const Mat4 &m);

    /// Camera at `eye` looking at `target`; `up` is the approximate world up direction.
    static Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, int width, int height,
                          double focal);
};

/// Screen-space footprint of one Gaussian.
struct Gaussian2D {
    Vec2 mean_uv = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0.0;
    Vec3 view_color = Vec3::Zero();
};

/// Removes rows from a per-Gaussian array, keeping survivors in order. `sorted_indices`
/// must be ascending and unique.
template <typename T>
void erase_rows(std::vector<T> &values, std::span<const std::size_t> sorted_indices, std::size_t width = 1) {
    if (sorted_indices.empty()) {
        return;
    }
    std::size_t write = 0;
    std::size_t next = 0;
    const std::size_t rows = values.size() / width;
    for (std::size_t row = 0; row < rows; ++row) {
        if (next < sorted_indices.size() && sorted_indices[next] == row) {
            ++next;
            continue;
        }
        if (write != row) {
            for (std::size_t k = 0; k < width; ++k) {
                values[write * width + k] = values[row * width + k];
            }
        }
        ++write;
    }
    values.resize(write * width);
}

} // namespace gsopt
