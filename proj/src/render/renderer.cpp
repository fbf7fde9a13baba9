#include <gsopt/core/errors.hpp>
#include <gsopt/render/renderer.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>

namespace gsopt {

namespace {

struct PixelSample {
    double gaussian_value; // exp(-q/2)
    double raw_alpha;      // opacity * gaussian_value before clamping
    double alpha;
    double dx;
    double dy;
};

/// Evaluates Gaussian `g` at pixel (px, py). Returns false outside the evaluation ellipse.
inline bool sample(const ProjectedGaussian &g, const RenderSettings &s, int px, int py, PixelSample &out) {
    if (px < g.x0 || px > g.x1 || py < g.y0 || py > g.y1) {
        return false;
    }
    const double dx = px - g.mean.x();
    const double dy = py - g.mean.y();
    const double q = g.conic_a * dx * dx + 2.0 * g.conic_b * dx * dy + g.conic_c * dy * dy;
    if (q > s.ellipse_sigmas * s.ellipse_sigmas) {
        return false;
    }
    out.gaussian_value = std::exp(-0.5 * q);
    out.raw_alpha = g.opacity * out.gaussian_value;
    out.alpha = std::min(s.alpha_clamp, out.raw_alpha);
    out.dx = dx;
    out.dy = dy;
    return true;
}

/// Replays front-to-back compositing of one pixel, calling `visit(list_position, weight, sample)` for
/// every evaluated Gaussian. Returns the final transmittance and writes the visited entry count.
template <typename Visit>
inline double composite_pixel(const RasterState &state, const std::vector<std::uint32_t> &list, int px, int py,
                              std::uint32_t &visited, Visit &&visit) {
    const RenderSettings &s = state.settings;
    double t = 1.0;
    visited = 0;
    PixelSample ps;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const ProjectedGaussian &g = state.projected[list[k]];
        if (!sample(g, s, px, py, ps)) {
            continue;
        }
        visit(k, t * ps.alpha, ps);
        t *= 1.0 - ps.alpha;
        visited = static_cast<std::uint32_t>(k + 1);
        if (t < s.min_transmittance) {
            break;
        }
    }
    return t;
}

struct TileBounds {
    int x0, x1, y0, y1;
};

TileBounds tile_bounds(const RasterState &state, int tile, int width, int height) {
    const int ts = state.settings.tile_size;
    const int tx = tile % state.tiles_x;
    const int ty = tile / state.tiles_x;
    return {tx * ts, std::min(width, (tx + 1) * ts), ty * ts, std::min(height, (ty + 1) * ts)};
}

template <typename Body>
void for_each_tile(int tile_count, Body &&body) {
    tbb::parallel_for(tbb::blocked_range<int>(0, tile_count), [&](const tbb::blocked_range<int> &r) {
        for (int tile = r.begin(); tile != r.end(); ++tile) {
            body(tile);
        }
    });
}

void project_all(const GaussianCloud &cloud, const Camera &camera, RasterState &state) {
    const RenderSettings &s = state.settings;
    const std::size_t n = cloud.size();
    state.projected.assign(n, ProjectedGaussian{});
    const Vec3 center = camera.center();
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            ProjectedGaussian &g = state.projected[i];
            g.p_cam = camera.to_camera(cloud.positions[i]);
            if (!in_frustum(camera, g.p_cam)) {
                continue;
            }
            const auto g2d = project_to_2d(cloud.positions[i], build_covariance(cloud.sizes[i], cloud.rotations[i]),
                                           camera, s.lowpass);
            if (!g2d) {
                continue;
            }
            g.mean = g2d->mean_uv;
            g.cov = g2d->cov2d;
            const double det = g.cov.determinant();
            if (!(det > 0.0)) {
                continue;
            }
            g.conic_a = g.cov(1, 1) / det;
            g.conic_b = -g.cov(0, 1) / det;
            g.conic_c = g.cov(0, 0) / det;
            const double rx = s.ellipse_sigmas * std::sqrt(g.cov(0, 0));
            const double ry = s.ellipse_sigmas * std::sqrt(g.cov(1, 1));
            g.x0 = std::max(0, static_cast<int>(std::ceil(g.mean.x() - rx)));
            g.x1 = std::min(camera.width - 1, static_cast<int>(std::floor(g.mean.x() + rx)));
            g.y0 = std::max(0, static_cast<int>(std::ceil(g.mean.y() - ry)));
            g.y1 = std::min(camera.height - 1, static_cast<int>(std::floor(g.mean.y() + ry)));
            if (g.x0 > g.x1 || g.y0 > g.y1) {
                continue;
            }
            g.opacity = cloud.opacity(i);
            g.color = eval_sh(cloud.sh_of(i), cloud.positions[i] - center, cloud.sh_degree);
            g.visible = true;
        }
    });
}

void build_tile_lists(const Camera &camera, RasterState &state) {
    const int ts = state.settings.tile_size;
    state.tiles_x = (camera.width + ts - 1) / ts;
    state.tiles_y = (camera.height + ts - 1) / ts;
    state.tile_lists.assign(static_cast<std::size_t>(state.tiles_x) * state.tiles_y, {});
    for (const std::size_t i : state.depth_order) {
        const ProjectedGaussian &g = state.projected[i];
        if (!g.visible) {
            continue;
        }
        for (int ty = g.y0 / ts; ty <= g.y1 / ts; ++ty) {
            for (int tx = g.x0 / ts; tx <= g.x1 / ts; ++tx) {
                state.tile_lists[static_cast<std::size_t>(ty) * state.tiles_x + tx].push_back(
                    static_cast<std::uint32_t>(i));
            }
        }
    }
}

void check_image(const Image &image, const Camera &camera, int channels, const char *what) {
    if (image.width() != camera.width || image.height() != camera.height || image.channels() != channels) {
        throw InvalidParameter(std::string(what) + ": image size does not match camera");
    }
}

} // namespace

RenderResult render_forward(const GaussianCloud &cloud, const Camera &camera, const RenderSettings &settings,
                            const Image *gt) {
    if (camera.width <= 0 || camera.height <= 0) {
        throw InvalidParameter("render_forward: camera has empty image size");
    }
    if (settings.tile_size <= 0) {
        throw InvalidParameter("render_forward: tile size must be positive");
    }
    if (gt != nullptr) {
        check_image(*gt, camera, 3, "render_forward");
    }

    RenderResult result;
    RenderOutput &out = result.output;
    RasterState &state = out.state;
    state.settings = settings;
    const int width = camera.width;
    const int height = camera.height;

    project_all(cloud, camera, state);
    state.depth_order = sort_by_depth(cloud, camera);
    build_tile_lists(camera, state);

    out.image = Image(width, height, 3);
    out.final_transmittance = Image(width, height, 1, 1.0);
    state.contributors.assign(static_cast<std::size_t>(width) * height, 0);

    const int tile_count = state.tiles_x * state.tiles_y;
    std::vector<std::vector<double>> tile_weight(tile_count);
    std::vector<std::vector<std::int64_t>> tile_footprint(tile_count);

    for_each_tile(tile_count, [&](int tile) {
        const auto &list = state.tile_lists[tile];
        auto &weights = tile_weight[tile];
        auto &footprint = tile_footprint[tile];
        weights.assign(list.size(), 0.0);
        footprint.assign(list.size(), 0);
        const TileBounds b = tile_bounds(state, tile, width, height);
        for (int py = b.y0; py < b.y1; ++py) {
            for (int px = b.x0; px < b.x1; ++px) {
                Vec3 color = Vec3::Zero();
                std::uint32_t visited = 0;
                const double t = composite_pixel(state, list, px, py, visited,
                                                 [&](std::size_t k, double w, const PixelSample &) {
                                                     color += w * state.projected[list[k]].color.rgb;
                                                     weights[k] += w;
                                                     footprint[k] += 1;
                                                 });
                color += t * settings.background;
                for (int c = 0; c < 3; ++c) {
                    out.image.at(px, py, c) = color[c];
                }
                out.final_transmittance.at(px, py) = t;
                state.contributors[static_cast<std::size_t>(py) * width + px] = visited;
            }
        }
    });

    RenderAux &aux = result.aux;
    aux.reset(cloud.size());
    for (int tile = 0; tile < tile_count; ++tile) {
        const auto &list = state.tile_lists[tile];
        for (std::size_t k = 0; k < list.size(); ++k) {
            aux.weight_sum[list[k]] += tile_weight[tile][k];
            aux.footprint[list[k]] += tile_footprint[tile][k];
        }
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        aux.visible[i] = state.projected[i].visible ? 1 : 0;
    }

    if (gt != nullptr) {
        accumulate_squared_error(out, out.image, *gt, aux.se_sum);
    }
    return result;
}

void accumulate_squared_error(const RenderOutput &output, const Image &rendered, const Image &gt,
                              std::vector<double> &se_sum) {
    const RasterState &state = output.state;
    if (!rendered.same_shape(output.image) || !gt.same_shape(output.image)) {
        throw InvalidParameter("accumulate_squared_error: image shapes differ");
    }
    if (se_sum.size() != state.projected.size()) {
        throw InvalidParameter("accumulate_squared_error: accumulator length differs from cloud size");
    }
    const int width = output.image.width();
    const int height = output.image.height();
    const int tile_count = state.tiles_x * state.tiles_y;
    std::vector<std::vector<double>> tile_se(tile_count);

    for_each_tile(tile_count, [&](int tile) {
        const auto &list = state.tile_lists[tile];
        auto &se = tile_se[tile];
        se.assign(list.size(), 0.0);
        const TileBounds b = tile_bounds(state, tile, width, height);
        for (int py = b.y0; py < b.y1; ++py) {
            for (int px = b.x0; px < b.x1; ++px) {
                double err = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double d = rendered.at(px, py, c) - gt.at(px, py, c);
                    err += d * d;
                }
                if (err == 0.0) {
                    continue;
                }
                std::uint32_t visited = 0;
                composite_pixel(state, list, px, py, visited,
                                [&](std::size_t k, double w, const PixelSample &) { se[k] += w * err; });
            }
        }
    });

    for (int tile = 0; tile < tile_count; ++tile) {
        const auto &list = state.tile_lists[tile];
        for (std::size_t k = 0; k < list.size(); ++k) {
            se_sum[list[k]] += tile_se[tile][k];
        }
    }
}

namespace {

/// Screen-space gradients of one Gaussian: mean (2), conic (a, b, c), opacity, color (3).
struct ScreenGrad {
    double mean_x = 0.0, mean_y = 0.0;
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    bool touched = false;

    ScreenGrad &operator+=(const ScreenGrad &o) {
        mean_x += o.mean_x;
        mean_y += o.mean_y;
        conic_a += o.conic_a;
        conic_b += o.conic_b;
        conic_c += o.conic_c;
        opacity += o.opacity;
        color += o.color;
        touched = touched || o.touched;
        return *this;
    }
};

} // namespace

CloudGradients render_backward(const GaussianCloud &cloud, const Camera &camera, const RenderOutput &output,
                               const Image &grad_image) {
    const RasterState &state = output.state;
    const RenderSettings &s = state.settings;
    check_image(grad_image, camera, 3, "render_backward");
    if (state.projected.size() != cloud.size() || !output.image.same_shape(grad_image)) {
        throw InvalidParameter("render_backward: forward state does not match inputs");
    }
    const int width = camera.width;
    const int height = camera.height;
    const int tile_count = state.tiles_x * state.tiles_y;
    std::vector<std::vector<ScreenGrad>> tile_grads(tile_count);

    for_each_tile(tile_count, [&](int tile) {
        const auto &list = state.tile_lists[tile];
        auto &grads = tile_grads[tile];
        grads.assign(list.size(), ScreenGrad{});
        const TileBounds b = tile_bounds(state, tile, width, height);
        PixelSample ps;
        for (int py = b.y0; py < b.y1; ++py) {
            for (int px = b.x0; px < b.x1; ++px) {
                const Vec3 dl_dpix(grad_image.at(px, py, 0), grad_image.at(px, py, 1), grad_image.at(px, py, 2));
                const std::uint32_t visited = state.contributors[static_cast<std::size_t>(py) * width + px];
                double t = output.final_transmittance.at(px, py);
                // Radiance composited behind the current Gaussian, background included.
                Vec3 behind = t * s.background;
                for (std::size_t k = visited; k-- > 0;) {
                    const ProjectedGaussian &g = state.projected[list[k]];
                    if (!sample(g, s, px, py, ps)) {
                        continue;
                    }
                    const double one_minus = 1.0 - ps.alpha;
                    t /= one_minus;
                    const double w = t * ps.alpha;
                    ScreenGrad &sg = grads[k];
                    sg.touched = true;
                    sg.color += w * dl_dpix;
                    const double dl_dalpha = dl_dpix.dot(t * g.color.rgb - behind / one_minus);
                    behind += w * g.color.rgb;
                    if (ps.raw_alpha >= s.alpha_clamp) {
                        continue;
                    }
                    sg.opacity += dl_dalpha * ps.gaussian_value;
                    const double dl_dq = -0.5 * dl_dalpha * g.opacity * ps.gaussian_value;
                    sg.mean_x += dl_dq * -2.0 * (g.conic_a * ps.dx + g.conic_b * ps.dy);
                    sg.mean_y += dl_dq * -2.0 * (g.conic_b * ps.dx + g.conic_c * ps.dy);
                    sg.conic_a += dl_dq * ps.dx * ps.dx;
                    sg.conic_b += dl_dq * 2.0 * ps.dx * ps.dy;
                    sg.conic_c += dl_dq * ps.dy * ps.dy;
                }
            }
        }
    });

    std::vector<ScreenGrad> screen(cloud.size());
    for (int tile = 0; tile < tile_count; ++tile) {
        const auto &list = state.tile_lists[tile];
        for (std::size_t k = 0; k < list.size(); ++k) {
            screen[list[k]] += tile_grads[tile][k];
        }
    }

    CloudGradients grads(cloud.size(), cloud.sh_stride());
    const Vec3 center = camera.center();
    const Mat3 &w2c = camera.rotation;
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, cloud.size()), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            const ScreenGrad &sg = screen[i];
            if (!sg.touched) {
                continue;
            }
            const ProjectedGaussian &g = state.projected[i];
            grads.touched[i] = 1;

            const double o = g.opacity;
            grads.opacity_logits[i] = sg.opacity * o * (1.0 - o);

            // Color through SH; the view direction depends on the position.
            Vec3 dl_dpos = eval_sh_backward(cloud.sh_of(i), cloud.positions[i] - center, cloud.sh_degree, g.color,
                                            sg.color, {grads.sh.data() + i * cloud.sh_stride(),
                                                       static_cast<std::size_t>(cloud.sh_stride())});

            // Conic -> 2D covariance: dL/dCov = -A G A with the symmetric full-matrix gradient G.
            Mat2 conic;
            conic << g.conic_a, g.conic_b, g.conic_b, g.conic_c;
            Mat2 g_conic;
            g_conic << sg.conic_a, 0.5 * sg.conic_b, 0.5 * sg.conic_b, sg.conic_c;
            const Mat2 g_cov2d = -conic * g_conic * conic;

            const Vec3 &pc = g.p_cam;
            const double inv_z = 1.0 / pc.z();
            const double inv_z2 = inv_z * inv_z;
            const double inv_z3 = inv_z2 * inv_z;
            const Mat23 jac = projection_jacobian(camera, pc);
            const Mat23 m = jac * w2c;
            const Mat3 cov3d = build_covariance(cloud.sizes[i], cloud.rotations[i]);

            const Mat3 g_cov3d = m.transpose() * g_cov2d * m;
            const Mat23 g_m = 2.0 * g_cov2d * m * cov3d;
            const Mat23 g_j = g_m * w2c.transpose();

            Vec3 dl_dpcam = Vec3::Zero();
            dl_dpcam.x() += g_j(0, 2) * (-camera.fx * inv_z2);
            dl_dpcam.y() += g_j(1, 2) * (-camera.fy * inv_z2);
            dl_dpcam.z() += g_j(0, 0) * (-camera.fx * inv_z2) + g_j(0, 2) * (2.0 * camera.fx * pc.x() * inv_z3) +
                            g_j(1, 1) * (-camera.fy * inv_z2) + g_j(1, 2) * (2.0 * camera.fy * pc.y() * inv_z3);

            // Projected mean.
            dl_dpcam.x() += sg.mean_x * camera.fx * inv_z;
            dl_dpcam.y() += sg.mean_y * camera.fy * inv_z;
            dl_dpcam.z() += -sg.mean_x * camera.fx * pc.x() * inv_z2 - sg.mean_y * camera.fy * pc.y() * inv_z2;

            dl_dpos += w2c.transpose() * dl_dpcam;
            grads.positions[i] = dl_dpos;

            build_covariance_vjp(cloud.sizes[i], cloud.rotations[i], g_cov3d, grads.sizes[i], grads.rotations[i]);
            grads.mean2d_grad_norm[i] = std::hypot(sg.mean_x, sg.mean_y);
        }
    });
    return grads;
}

} // namespace gsopt
