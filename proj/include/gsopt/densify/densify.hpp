#pragma once

#include <gsopt/core/gradients.hpp>
#include <gsopt/core/types.hpp>
#include <gsopt/densify/split_table.hpp>
#include <gsopt/optim/optimizer.hpp>
#include <gsopt/precision/precision.hpp>
#include <gsopt/render/renderer.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gsopt {

/// Per-camera, per-Gaussian render statistics summed between densification events.
/// Stored camera-major: entry [c * gaussian_count + i].
class DensifyAccumulators {
public:
    DensifyAccumulators() = default;
    DensifyAccumulators(std::size_t cameras, std::size_t gaussians) { reset(cameras, gaussians); }

    void reset(std::size_t cameras, std::size_t gaussians);
    /// Adds one render of camera `camera` to the sums.
    void add(std::size_t camera, const RenderAux &aux);

    std::size_t camera_count() const { return cameras_; }
    std::size_t gaussian_count() const { return gaussians_; }

    double weight_sum(std::size_t c, std::size_t i) const { return weight_sum_[c * gaussians_ + i]; }
    double se_sum(std::size_t c, std::size_t i) const { return se_sum_[c * gaussians_ + i]; }
    std::int64_t footprint(std::size_t c, std::size_t i) const { return footprint_[c * gaussians_ + i]; }

    void set(std::size_t c, std::size_t i, double weight_sum, std::int64_t footprint, double se_sum);

private:
    std::size_t cameras_ = 0;
    std::size_t gaussians_ = 0;
    std::vector<double> weight_sum_;
    std::vector<std::int64_t> footprint_;
    std::vector<double> se_sum_;
};

/// max over cameras of weight_sum / footprint (0 where the footprint is 0).
std::vector<double> effective_opacity(const DensifyAccumulators &acc);

/// Indices with score < tau, keeping only the ceil(max_fraction * n) lowest scores (ties by index).
/// Returned ascending.
std::vector<std::size_t> select_prune(std::span<const double> scores, double tau, double max_fraction,
                                      std::size_t n);

/// sum over cameras of SE_{c,i} / sum_j SE_{c,j}; cameras with zero total contribute nothing.
std::vector<double> snr_priority(const DensifyAccumulators &acc);

/// First-order PSNR gain of shrinking the error share `share` = SE_{c,i}/SE_c by (1 - alpha_split),
/// and the exact value it approximates.
double psnr_gain_first_order(double share, double alpha_split);
double psnr_gain_exact(double share, double alpha_split);

/// Mother index and the two slots holding its children (the first reuses the mother's slot).
struct SplitChildren {
    std::size_t mother;
    std::array<std::size_t, 2> children;
};

/// Replaces each listed Gaussian by two children shifted by +-shift * sigma_max along its longest
/// axis, with the child size along that axis and child opacity taken from `table`.
/// Throws ConsistencyError if an index also appears in `pending_prune`.
std::vector<SplitChildren> split_gaussians(GaussianCloud &cloud, std::span<const std::size_t> indices,
                                           const SplitTable &table, double shift = 0.3,
                                           std::span<const std::size_t> pending_prune = {});

/// Geometric growth of the Gaussian count from `initial` to `budget` over `events` densification events.
class BudgetSchedule {
public:
    BudgetSchedule() = default;
    BudgetSchedule(std::size_t initial, std::size_t budget, int events);

    /// Target count after event `event` (0-based); the last event reaches the budget.
    std::size_t target(int event) const;

    std::size_t budget() const { return budget_; }

private:
    std::size_t initial_ = 0;
    std::size_t budget_ = 0;
    int events_ = 1;
};

struct DensifyReport {
    std::vector<std::size_t> pruned_indices;
    /// Indices, after pruning, of the Gaussians that were split.
    std::vector<std::size_t> split_indices;
    std::vector<double> prune_scores;
    std::vector<double> split_scores;
    std::size_t old_count = 0;
    std::size_t new_count = 0;
};

struct DensifySettings {
    double tau_prune = 0.02;
    double max_prune_fraction = 0.01;
    double split_shift = 0.3;
    double inherit_lifespan = kDefaultInheritLifespan;
    double inherit_gradient = kDefaultInheritGradient;
    double beta_min = 0.5;
    PrecisionSettings precision;

    bool effective_opacity_pruning = true;
    /// Threshold of the plain low-opacity pruning used when effective-opacity pruning is off.
    double fallback_min_opacity = 0.005;
    bool snr_prioritization = true;
    bool state_inheritance = true;
};

/// One densification event: prune, split the highest-priority Gaussians up to `target_count`, carry
/// optimizer states to the children, then recompute confidence radii into `deltas` and floor sizes.
DensifyReport densify_step(GaussianCloud &cloud, AdamState &state, const DensifyAccumulators &acc,
                           std::size_t target_count, const SplitTable &table, std::span<const Camera> cameras,
                           const DensifySettings &settings, std::vector<double> &deltas);

/// Running sum of projected-mean gradient norms, used by the vanilla densifier.
class GradientAccumulator {
public:
    void reset(std::size_t gaussians);
    void add(const CloudGradients &grads);
    /// Mean gradient norm over the renders in which each Gaussian was touched.
    std::vector<double> average() const;
    std::size_t size() const { return sum_.size(); }

private:
    std::vector<double> sum_;
    std::vector<std::int64_t> count_;
};

struct VanillaDensifySettings {
    double prune_min_opacity = 0.005;
    double percent_dense = 0.01;
    double scene_extent = 1.0;
    double split_size_divisor = 1.6;
};

/// Gradient-ranked clone/split followed by low-opacity pruning, with reset optimizer states for
/// new Gaussians. Children of a split are sampled from the mother's distribution.
DensifyReport vanilla_densify_step(GaussianCloud &cloud, VanillaAdam &optimizer, const GradientAccumulator &grads,
                                   std::size_t target_count, const VanillaDensifySettings &settings,
                                   std::mt19937_64 &rng);

/// Caps every opacity at `max_opacity` and clears the opacity moments.
void reset_opacity(GaussianCloud &cloud, VanillaAdam &optimizer, double max_opacity = 0.01);

} // namespace gsopt
