#pragma once

#include <gsopt/core/types.hpp>

#include <Eigen/Core>

#include <vector>

namespace gsopt {

using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Per-image affine color correction out = M * rgb + b, stored as [M | b].
struct ExposureParams {
    std::vector<Mat34> transforms;

    ExposureParams() = default;
    explicit ExposureParams(std::size_t images) { reset(images); }

    /// Identity matrices, zero offsets.
    void reset(std::size_t images);
    std::size_t size() const { return transforms.size(); }
};

/// M * rendered(p) + b, clamped to [0, 1].
Image apply_exposure(const Image &rendered, const Mat34 &transform);
Image apply_exposure(const Image &rendered, const ExposureParams &params, std::size_t image_index);

/// Backpropagates `grad_out` through apply_exposure. Clamped outputs pass no gradient.
/// Returns dL/d(rendered) and adds dL/d[M | b] to `grad_transform`.
Image exposure_backward(const Image &rendered, const Mat34 &transform, const Image &grad_out, Mat34 &grad_transform);

/// Bias-corrected Adam over one 3x4 transform per image; only the stepped image is updated.
class ExposureOptimizer {
public:
    ExposureOptimizer() = default;
    ExposureOptimizer(std::size_t images, double learning_rate = 1e-3);

    void step(ExposureParams &params, std::size_t image_index, const Mat34 &grad);

private:
    double lr_ = 1e-3;
    std::vector<Mat34> m_;
    std::vector<Mat34> v_;
    std::vector<long> t_;
};

/// Least-squares affine map taking `rendered` colors to `target` colors.
Mat34 fit_exposure(const Image &rendered, const Image &target);

} // namespace gsopt
