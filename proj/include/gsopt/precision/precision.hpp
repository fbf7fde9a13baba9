#pragma once

#include <gsopt/core/types.hpp>

#include <span>
#include <vector>

namespace gsopt {

/// Multi-view localization precision of a 3D point.
struct PrecisionEstimate {
    /// Fused inverse covariance of the point position (world units^-2).
    Mat3 precision = Mat3::Zero();
    /// Scalar confidence radius, world units.
    double delta = 0.0;
};

struct PrecisionSettings {
    /// Reprojection noise standard deviation, pixels.
    double sigma_uv = 1.0;
    /// Scale applied to tr(precision)^-1/2.
    double alpha = 2.0;
    double near = 0.01;
};

/// Precision contribution of one camera: R^T diag(g, g, 0) R with g = f^2 / (z^2 sigma_uv^2).
/// Zero when the point is not in front of the camera.
Mat3 camera_precision_term(const Camera &camera, const Vec3 &position, double sigma_uv, double near = 0.01);

/// Sums the per-camera terms and derives the confidence radius alpha * tr(P)^-1/2. A point seen by
/// no camera falls back to (distance to the nearest camera center) * sigma_uv / f.
PrecisionEstimate fuse_precision(std::span<const Camera> cameras, const Vec3 &position,
                                 const PrecisionSettings &settings = {});

/// Confidence radius of every Gaussian in the cloud.
std::vector<double> compute_deltas(const GaussianCloud &cloud, std::span<const Camera> cameras,
                                   const PrecisionSettings &settings = {});

/// sizes <- max(sizes, beta_min * delta_i). Idempotent.
void min_size_clamp(GaussianCloud &cloud, std::span<const double> deltas, double beta_min);

} // namespace gsopt
