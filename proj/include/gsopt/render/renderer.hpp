#pragma once

#include <gsopt/core/geometry.hpp>
#include <gsopt/core/gradients.hpp>
#include <gsopt/core/sh.hpp>
#include <gsopt/core/types.hpp>

#include <cstdint>
#include <vector>

namespace gsopt {

struct RenderSettings {
    double lowpass = kDefaultLowpass;
    double alpha_clamp = 0.99;
    double min_transmittance = 1e-4;
    int tile_size = 16;
    /// Gaussians are evaluated inside this many standard deviations of their screen ellipse.
    double ellipse_sigmas = 3.0;
    Vec3 background = Vec3::Zero();
};

/// Screen-space data of one Gaussian for one camera, shared by the forward and backward passes.
struct ProjectedGaussian {
    bool visible = false;
    Vec3 p_cam = Vec3::Zero();
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    /// Inverse 2D covariance [[a, b], [b, c]].
    double conic_a = 0.0;
    double conic_b = 0.0;
    double conic_c = 0.0;
    double opacity = 0.0;
    ShColor color;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

/// Everything the backward pass needs to replay compositing.
struct RasterState {
    RenderSettings settings;
    std::vector<ProjectedGaussian> projected;
    std::vector<std::size_t> depth_order;
    int tiles_x = 0;
    int tiles_y = 0;
    /// Per tile, overlapping Gaussian indices in front-to-back order.
    std::vector<std::vector<std::uint32_t>> tile_lists;
    /// Per pixel, number of tile-list entries visited before compositing stopped.
    std::vector<std::uint32_t> contributors;
};

struct RenderOutput {
    Image image;
    /// Single-channel transmittance left after the last composited Gaussian.
    Image final_transmittance;
    RasterState state;
};

/// Per-Gaussian statistics gathered by a render pass.
struct RenderAux {
    std::vector<double> weight_sum;
    std::vector<double> se_sum;
    std::vector<std::int64_t> footprint;
    std::vector<std::uint8_t> visible;

    void reset(std::size_t count) {
        weight_sum.assign(count, 0.0);
        se_sum.assign(count, 0.0);
        footprint.assign(count, 0);
        visible.assign(count, 0);
    }
};

struct RenderResult {
    RenderOutput output;
    RenderAux aux;
};

/// Tile-based front-to-back alpha compositing. When `gt` is given, the per-Gaussian squared error
/// against it is accumulated with the finished image.
RenderResult render_forward(const GaussianCloud &cloud, const Camera &camera, const RenderSettings &settings = {},
                            const Image *gt = nullptr);

/// Adds sum_p w_i(p) |rendered(p) - gt(p)|^2 to `se_sum` for every Gaussian, replaying the
/// compositing recorded in `output`. `rendered` may differ from output.image (e.g. after exposure).
void accumulate_squared_error(const RenderOutput &output, const Image &rendered, const Image &gt,
                              std::vector<double> &se_sum);

/// Analytic gradients of a pixel loss with respect to every Gaussian parameter.
CloudGradients render_backward(const GaussianCloud &cloud, const Camera &camera, const RenderOutput &output,
                               const Image &grad_image);

} // namespace gsopt
