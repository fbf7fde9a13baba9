#pragma once

#include <gsopt/core/gradients.hpp>
#include <gsopt/core/types.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gsopt {

enum class ParamGroupId : int { kPosition = 0, kSizes = 1, kRotation = 2, kOpacity = 3, kSh = 4 };
inline constexpr int kParamGroupCount = 5;

std::string_view to_string(ParamGroupId id);

struct ParamGroup {
    ParamGroupId id = ParamGroupId::kPosition;
    double learning_rate = 1e-3;
    /// Multiply the update by the per-Gaussian confidence radius.
    bool uses_delta_scaling = false;
};

/// Settings of the lifespan-aware sparse Adam.
struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Position and size rates multiply delta, which is small (~1e-2 at desk scale); calibrated by sweep.
    std::array<ParamGroup, kParamGroupCount> groups{{
        {ParamGroupId::kPosition, 0.2, true},
        {ParamGroupId::kSizes, 0.2, true},
        {ParamGroupId::kRotation, 1e-3, false},
        {ParamGroupId::kOpacity, 5e-2, false},
        {ParamGroupId::kSh, 2.5e-3, false},
    }};
    /// Step only Gaussians flagged in CloudGradients::touched. When false every Gaussian is stepped and
    /// untouched ones see a zero gradient.
    bool sparse = true;
    /// When false, delta scaling is replaced by 1 for every group.
    bool scaled_updates = true;
    /// Use g_hat / (g2_hat + eps) instead of g_hat / (sqrt(g2_hat) + eps).
    bool literal_eq3_denominator = false;
    /// Sizes are floored at beta_min * delta after every step.
    double beta_min = 0.5;

    ParamGroup &group(ParamGroupId id) { return groups[static_cast<int>(id)]; }
    const ParamGroup &group(ParamGroupId id) const { return groups[static_cast<int>(id)]; }
};

/// Filtered first and second moments of one parameter group, `width` scalars per Gaussian.
struct GroupMoments {
    int width = 0;
    std::vector<double> g_hat;
    std::vector<double> g2_hat;
};

/// Optimizer state kept row-aligned with a GaussianCloud.
class AdamState {
public:
    AdamState() = default;
    AdamState(int sh_stride, std::size_t count);

    std::size_t size() const { return lifespan.size(); }

    /// Appends `n` zero-initialized rows.
    void append(std::size_t n);
    /// Removes rows, keeping survivors in order.
    void remove(std::span<const std::size_t> indices);
    /// Zeroes the moments of one group for one Gaussian.
    void reset_group(std::size_t i, ParamGroupId id);
    /// Throws ConsistencyError unless the state has one row per Gaussian of `cloud`.
    void check_aligned(const GaussianCloud &cloud) const;

    GroupMoments &moments(ParamGroupId id) { return groups[static_cast<int>(id)]; }
    const GroupMoments &moments(ParamGroupId id) const { return groups[static_cast<int>(id)]; }

    /// Number of steps that updated each Gaussian.
    std::vector<std::int64_t> lifespan;
    std::array<GroupMoments, kParamGroupCount> groups;
};

struct StepStats {
    std::size_t stepped = 0;
    /// Gaussians skipped because their gradient contained NaN or infinity.
    std::size_t rejected = 0;
};

/// One step of the lifespan-aware Adam:
///   t <- t + 1,  a_s = max(1/t, 1 - beta_s)
///   g_hat  <- g_hat  + a_1 (g   - g_hat)
///   g2_hat <- g2_hat + a_2 (g^2 - g2_hat)
///   theta  <- theta - lr * delta * g_hat / (sqrt(g2_hat) + eps)
/// Quaternions are renormalized and sizes floored at beta_min * delta afterwards.
/// `position_lr_scale` multiplies the position learning rate (schedules).
StepStats step_sparse(GaussianCloud &cloud, AdamState &state, const CloudGradients &grads,
                      std::span<const double> deltas, const OptimizerConfig &config, double position_lr_scale = 1.0);

/// Copies a faded version of the mother's state onto each child:
/// t = round(alpha_t t_m), g_hat = alpha_g g_hat_m, g2_hat = alpha_g^2 g2_hat_m.
/// A child index may equal the mother index.
void inherit_states(AdamState &state, std::size_t mother, std::span<const std::size_t> children, double alpha_t,
                    double alpha_g);

inline constexpr double kDefaultInheritLifespan = 1.0;
inline constexpr double kDefaultInheritGradient = 0.2;

/// Standard bias-corrected Adam over log-sizes, as used by the vanilla comparison arm.
struct VanillaAdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
    double lr_position = 1.6e-4;
    double lr_log_size = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 5e-2;
    double lr_sh_dc = 2.5e-3;
    double lr_sh_rest = 2.5e-3 / 20.0;
};

class VanillaAdam {
public:
    VanillaAdam() = default;
    VanillaAdam(int sh_stride, std::size_t count) : state(sh_stride, count) {}

    /// Dense step over every Gaussian; untouched Gaussians see a zero gradient.
    void step(GaussianCloud &cloud, const CloudGradients &grads, const VanillaAdamConfig &config,
              double position_lr_scale = 1.0);

    AdamState state;
    std::int64_t step_count = 0;
};

} // namespace gsopt
