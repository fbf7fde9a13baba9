#include <gsopt/core/errors.hpp>
#include <gsopt/optim/optimizer.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace gsopt {

std::string_view to_string(ParamGroupId id) {
    switch (id) {
    case ParamGroupId::kPosition: return "position";
    case ParamGroupId::kSizes: return "sizes";
    case ParamGroupId::kRotation: return "rotation";
    case ParamGroupId::kOpacity: return "opacity";
    case ParamGroupId::kSh: return "sh";
    }
    return "unknown";
}

namespace {

constexpr std::array<ParamGroupId, kParamGroupCount> kAllGroups{
    ParamGroupId::kPosition, ParamGroupId::kSizes, ParamGroupId::kRotation, ParamGroupId::kOpacity,
    ParamGroupId::kSh};

double *param_row(GaussianCloud &cloud, ParamGroupId id, std::size_t i) {
    switch (id) {
    case ParamGroupId::kPosition: return cloud.positions[i].data();
    case ParamGroupId::kSizes: return cloud.sizes[i].data();
    case ParamGroupId::kRotation: return cloud.rotations[i].data();
    case ParamGroupId::kOpacity: return &cloud.opacity_logits[i];
    case ParamGroupId::kSh: return cloud.sh.data() + i * cloud.sh_stride();
    }
    return nullptr;
}

const double *grad_row(const CloudGradients &grads, ParamGroupId id, std::size_t i, int sh_stride) {
    switch (id) {
    case ParamGroupId::kPosition: return grads.positions[i].data();
    case ParamGroupId::kSizes: return grads.sizes[i].data();
    case ParamGroupId::kRotation: return grads.rotations[i].data();
    case ParamGroupId::kOpacity: return &grads.opacity_logits[i];
    case ParamGroupId::kSh: return grads.sh.data() + i * static_cast<std::size_t>(sh_stride);
    }
    return nullptr;
}

bool gradient_finite(const CloudGradients &grads, std::size_t i, int sh_stride) {
    if (!grads.positions[i].allFinite() || !grads.sizes[i].allFinite() || !grads.rotations[i].allFinite() ||
        !std::isfinite(grads.opacity_logits[i])) {
        return false;
    }
    const double *sh = grads.sh.data() + i * static_cast<std::size_t>(sh_stride);
    return std::all_of(sh, sh + sh_stride, [](double v) { return std::isfinite(v); });
}

void check_gradients(const GaussianCloud &cloud, const CloudGradients &grads) {
    const std::size_t n = cloud.size();
    if (grads.positions.size() != n || grads.sizes.size() != n || grads.rotations.size() != n ||
        grads.opacity_logits.size() != n || grads.touched.size() != n ||
        grads.sh.size() != n * static_cast<std::size_t>(cloud.sh_stride())) {
        throw InvalidParameter("optimizer: gradient arrays do not match the cloud");
    }
}

} // namespace

AdamState::AdamState(int sh_stride, std::size_t count) {
    const std::array<int, kParamGroupCount> widths{3, 3, 4, 1, sh_stride};
    for (int g = 0; g < kParamGroupCount; ++g) {
        groups[g].width = widths[g];
    }
    append(count);
}

void AdamState::append(std::size_t n) {
    lifespan.resize(lifespan.size() + n, 0);
    for (auto &g : groups) {
        g.g_hat.resize(g.g_hat.size() + n * g.width, 0.0);
        g.g2_hat.resize(g.g2_hat.size() + n * g.width, 0.0);
    }
}

void AdamState::remove(std::span<const std::size_t> indices) {
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (!sorted.empty() && sorted.back() >= size()) {
        throw ConsistencyError("AdamState::remove: index out of range");
    }
    erase_rows(lifespan, sorted);
    for (auto &g : groups) {
        erase_rows(g.g_hat, sorted, g.width);
        erase_rows(g.g2_hat, sorted, g.width);
    }
}

void AdamState::reset_group(std::size_t i, ParamGroupId id) {
    GroupMoments &m = moments(id);
    std::fill_n(m.g_hat.begin() + i * m.width, m.width, 0.0);
    std::fill_n(m.g2_hat.begin() + i * m.width, m.width, 0.0);
}

void AdamState::check_aligned(const GaussianCloud &cloud) const {
    const std::size_t n = cloud.size();
    bool ok = lifespan.size() == n && moments(ParamGroupId::kSh).width == cloud.sh_stride();
    for (const auto &g : groups) {
        ok = ok && g.g_hat.size() == n * g.width && g.g2_hat.size() == n * g.width;
    }
    if (!ok) {
        throw ConsistencyError("optimizer state is not aligned with the Gaussian cloud (" +
                               std::to_string(lifespan.size()) + " rows vs " + std::to_string(n) + ")");
    }
}

StepStats step_sparse(GaussianCloud &cloud, AdamState &state, const CloudGradients &grads,
                      std::span<const double> deltas, const OptimizerConfig &config, double position_lr_scale) {
    state.check_aligned(cloud);
    check_gradients(cloud, grads);
    if (deltas.size() != cloud.size()) {
        throw InvalidParameter("step_sparse: one delta per Gaussian required");
    }
    for (const auto &g : config.groups) {
        if (!(g.learning_rate > 0.0)) {
            throw InvalidParameter("step_sparse: learning rates must be positive");
        }
    }

    const int sh_stride = cloud.sh_stride();
    const std::size_t n = cloud.size();
    std::vector<std::uint8_t> stepped(n, 0);
    std::vector<std::uint8_t> rejected(n, 0);

    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            const bool touched = grads.touched[i] != 0;
            if (config.sparse && !touched) {
                continue;
            }
            if (touched && !gradient_finite(grads, i, sh_stride)) {
                rejected[i] = 1;
                continue;
            }
            stepped[i] = 1;
            const std::int64_t t = ++state.lifespan[i];
            const double td = static_cast<double>(t);
            // max(1/t, 1 - beta): the running-mean branch divides by t directly to stay exact.
            const bool mean1 = 1.0 / td >= 1.0 - config.beta1;
            const bool mean2 = 1.0 / td >= 1.0 - config.beta2;
            const double a1 = 1.0 - config.beta1;
            const double a2 = 1.0 - config.beta2;

            for (const ParamGroupId id : kAllGroups) {
                const ParamGroup &pg = config.group(id);
                GroupMoments &m = state.moments(id);
                double scale = pg.learning_rate;
                if (id == ParamGroupId::kPosition) {
                    scale *= position_lr_scale;
                }
                if (pg.uses_delta_scaling && config.scaled_updates) {
                    scale *= deltas[i];
                }
                double *theta = param_row(cloud, id, i);
                const double *g = touched ? grad_row(grads, id, i, sh_stride) : nullptr;
                double *gh = m.g_hat.data() + i * m.width;
                double *g2 = m.g2_hat.data() + i * m.width;
                for (int k = 0; k < m.width; ++k) {
                    const double gk = g != nullptr ? g[k] : 0.0;
                    gh[k] += mean1 ? (gk - gh[k]) / td : a1 * (gk - gh[k]);
                    g2[k] += mean2 ? (gk * gk - g2[k]) / td : a2 * (gk * gk - g2[k]);
                    const double denom =
                        (config.literal_eq3_denominator ? g2[k] : std::sqrt(g2[k])) + config.epsilon;
                    theta[k] -= scale * gh[k] / denom;
                }
            }

            Vec4 &q = cloud.rotations[i];
            const double qn = q.norm();
            q = qn > 0.0 ? Vec4(q / qn) : Vec4(1.0, 0.0, 0.0, 0.0);
            cloud.sizes[i] = cloud.sizes[i].cwiseMax(config.beta_min * deltas[i]);
        }
    });

    StepStats stats;
    for (std::size_t i = 0; i < n; ++i) {
        stats.stepped += stepped[i];
        stats.rejected += rejected[i];
    }
    return stats;
}

void inherit_states(AdamState &state, std::size_t mother, std::span<const std::size_t> children, double alpha_t,
                    double alpha_g) {
    if (mother >= state.size()) {
        throw InvalidParameter("inherit_states: mother index out of range");
    }
    for (const std::size_t c : children) {
        if (c >= state.size()) {
            throw InvalidParameter("inherit_states: child index out of range");
        }
    }
    if (alpha_t < 0.0 || alpha_t > 1.0 || alpha_g < 0.0 || alpha_g > 1.0) {
        throw InvalidParameter("inherit_states: fading factors must lie in [0, 1]");
    }
    const auto t_child = static_cast<std::int64_t>(std::llround(alpha_t * static_cast<double>(state.lifespan[mother])));
    for (auto &m : state.groups) {
        const std::vector<double> gh(m.g_hat.begin() + mother * m.width, m.g_hat.begin() + (mother + 1) * m.width);
        const std::vector<double> g2(m.g2_hat.begin() + mother * m.width,
                                     m.g2_hat.begin() + (mother + 1) * m.width);
        for (const std::size_t c : children) {
            for (int k = 0; k < m.width; ++k) {
                m.g_hat[c * m.width + k] = alpha_g * gh[k];
                m.g2_hat[c * m.width + k] = alpha_g * alpha_g * g2[k];
            }
        }
    }
    for (const std::size_t c : children) {
        state.lifespan[c] = t_child;
    }
}

void VanillaAdam::step(GaussianCloud &cloud, const CloudGradients &grads, const VanillaAdamConfig &config,
                       double position_lr_scale) {
    state.check_aligned(cloud);
    check_gradients(cloud, grads);
    ++step_count;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step_count));
    const int sh_stride = cloud.sh_stride();
    const std::size_t n = cloud.size();

    auto adam = [&](double &theta, double g, double &m, double &v, double lr) {
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        theta -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    };

    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            const bool use = grads.touched[i] != 0 && gradient_finite(grads, i, sh_stride);
            for (const ParamGroupId id : kAllGroups) {
                GroupMoments &mo = state.moments(id);
                double *m = mo.g_hat.data() + i * mo.width;
                double *v = mo.g2_hat.data() + i * mo.width;
                const double *g = use ? grad_row(grads, id, i, sh_stride) : nullptr;
                switch (id) {
                case ParamGroupId::kPosition:
                    for (int k = 0; k < 3; ++k) {
                        adam(cloud.positions[i][k], g ? g[k] : 0.0, m[k], v[k], config.lr_position * position_lr_scale);
                    }
                    break;
                case ParamGroupId::kSizes:
                    for (int k = 0; k < 3; ++k) {
                        // Log parameterization: d/d(log s) = s d/ds.
                        double log_s = std::log(cloud.sizes[i][k]);
                        adam(log_s, g ? g[k] * cloud.sizes[i][k] : 0.0, m[k], v[k], config.lr_log_size);
                        cloud.sizes[i][k] = std::exp(log_s);
                    }
                    break;
                case ParamGroupId::kRotation:
                    for (int k = 0; k < 4; ++k) {
                        adam(cloud.rotations[i][k], g ? g[k] : 0.0, m[k], v[k], config.lr_rotation);
                    }
                    break;
                case ParamGroupId::kOpacity:
                    adam(cloud.opacity_logits[i], g ? g[0] : 0.0, m[0], v[0], config.lr_opacity);
                    break;
                case ParamGroupId::kSh: {
                    double *sh = cloud.sh.data() + i * sh_stride;
                    for (int k = 0; k < sh_stride; ++k) {
                        adam(sh[k], g ? g[k] : 0.0, m[k], v[k], k < 3 ? config.lr_sh_dc : config.lr_sh_rest);
                    }
                    break;
                }
                }
            }
            Vec4 &q = cloud.rotations[i];
            const double qn = q.norm();
            q = qn > 0.0 ? Vec4(q / qn) : Vec4(1.0, 0.0, 0.0, 0.0);
        }
    });
}

} // namespace gsopt
