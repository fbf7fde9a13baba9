#include <gsopt/core/errors.hpp>
#include <gsopt/precision/precision.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <limits>

namespace gsopt {

Mat3 camera_precision_term(const Camera &camera, const Vec3 &position, double sigma_uv, double near) {
    const Vec3 p_cam = camera.to_camera(position);
    if (!(p_cam.z() > near)) {
        return Mat3::Zero();
    }
    const double f = camera.focal();
    const double g = (f * f) / (p_cam.z() * p_cam.z() * sigma_uv * sigma_uv);
    const Mat3 &r = camera.rotation;
    // R^T diag(g, g, 0) R, written as the sum of the two image-plane axis outer products.
    Mat3 term = g * (r.row(0).transpose() * r.row(0) + r.row(1).transpose() * r.row(1));
    return 0.5 * (term + term.transpose());
}

PrecisionEstimate fuse_precision(std::span<const Camera> cameras, const Vec3 &position,
                                 const PrecisionSettings &settings) {
    if (cameras.empty()) {
        throw InvalidParameter("fuse_precision: camera list is empty");
    }
    if (!(settings.sigma_uv > 0.0)) {
        throw InvalidParameter("fuse_precision: sigma_uv must be positive");
    }
    PrecisionEstimate est;
    for (const Camera &cam : cameras) {
        est.precision += camera_precision_term(cam, position, settings.sigma_uv, settings.near);
    }
    const double trace = est.precision.trace();
    if (trace > 0.0) {
        est.delta = settings.alpha / std::sqrt(trace);
        return est;
    }
    double nearest = std::numeric_limits<double>::infinity();
    double focal = 1.0;
    for (const Camera &cam : cameras) {
        const double d = (cam.center() - position).norm();
        if (d < nearest) {
            nearest = d;
            focal = cam.focal();
        }
    }
    est.delta = std::max(nearest, settings.near) * settings.sigma_uv / focal;
    return est;
}

std::vector<double> compute_deltas(const GaussianCloud &cloud, std::span<const Camera> cameras,
                                   const PrecisionSettings &settings) {
    std::vector<double> deltas(cloud.size(), 0.0);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, cloud.size()), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            deltas[i] = fuse_precision(cameras, cloud.positions[i], settings).delta;
        }
    });
    return deltas;
}

void min_size_clamp(GaussianCloud &cloud, std::span<const double> deltas, double beta_min) {
    if (deltas.size() != cloud.size()) {
        throw InvalidParameter("min_size_clamp: one delta per Gaussian required");
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double floor = beta_min * deltas[i];
        cloud.sizes[i] = cloud.sizes[i].cwiseMax(floor);
    }
}

} // namespace gsopt
