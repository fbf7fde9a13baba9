#include <gsopt/core/errors.hpp>
#include <gsopt/densify/densify.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsopt {

void DensifyAccumulators::reset(std::size_t cameras, std::size_t gaussians) {
    cameras_ = cameras;
    gaussians_ = gaussians;
    weight_sum_.assign(cameras * gaussians, 0.0);
    footprint_.assign(cameras * gaussians, 0);
    se_sum_.assign(cameras * gaussians, 0.0);
}

void DensifyAccumulators::add(std::size_t camera, const RenderAux &aux) {
    if (camera >= cameras_) {
        throw InvalidParameter("DensifyAccumulators::add: camera index out of range");
    }
    if (aux.weight_sum.size() != gaussians_ || aux.footprint.size() != gaussians_ || aux.se_sum.size() != gaussians_) {
        throw ConsistencyError("DensifyAccumulators::add: render statistics do not match the Gaussian count");
    }
    const std::size_t base = camera * gaussians_;
    for (std::size_t i = 0; i < gaussians_; ++i) {
        weight_sum_[base + i] += aux.weight_sum[i];
        footprint_[base + i] += aux.footprint[i];
        se_sum_[base + i] += aux.se_sum[i];
    }
}

void DensifyAccumulators::set(std::size_t c, std::size_t i, double weight_sum, std::int64_t footprint,
                              double se_sum) {
    if (c >= cameras_ || i >= gaussians_) {
        throw InvalidParameter("DensifyAccumulators::set: index out of range");
    }
    weight_sum_[c * gaussians_ + i] = weight_sum;
    footprint_[c * gaussians_ + i] = footprint;
    se_sum_[c * gaussians_ + i] = se_sum;
}

std::vector<double> effective_opacity(const DensifyAccumulators &acc) {
    const std::size_t n = acc.gaussian_count();
    std::vector<double> score(n, 0.0);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            double best = 0.0;
            for (std::size_t c = 0; c < acc.camera_count(); ++c) {
                const std::int64_t s = acc.footprint(c, i);
                if (s > 0) {
                    best = std::max(best, acc.weight_sum(c, i) / static_cast<double>(s));
                }
            }
            score[i] = best;
        }
    });
    return score;
}

std::vector<std::size_t> select_prune(std::span<const double> scores, double tau, double max_fraction,
                                      std::size_t n) {
    if (max_fraction < 0.0 || max_fraction > 1.0) {
        throw InvalidParameter("select_prune: max_fraction must lie in [0, 1]");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] < tau) {
            candidates.push_back(i);
        }
    }
    const auto cap = static_cast<std::size_t>(std::ceil(max_fraction * static_cast<double>(n) - 1e-12));
    if (candidates.size() > cap) {
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
        candidates.resize(cap);
        std::sort(candidates.begin(), candidates.end());
    }
    return candidates;
}

std::vector<double> snr_priority(const DensifyAccumulators &acc) {
    const std::size_t n = acc.gaussian_count();
    std::vector<double> totals(acc.camera_count(), 0.0);
    for (std::size_t c = 0; c < acc.camera_count(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            totals[c] += acc.se_sum(c, i);
        }
    }
    std::vector<double> score(n, 0.0);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) {
            double p = 0.0;
            for (std::size_t c = 0; c < acc.camera_count(); ++c) {
                if (totals[c] > 0.0) {
                    p += acc.se_sum(c, i) / totals[c];
                }
            }
            score[i] = p;
        }
    });
    return score;
}

double psnr_gain_first_order(double share, double alpha_split) {
    return 10.0 / std::log(10.0) * share * (1.0 - alpha_split);
}

double psnr_gain_exact(double share, double alpha_split) {
    return -10.0 * std::log10(1.0 - share * (1.0 - alpha_split));
}

std::vector<SplitChildren> split_gaussians(GaussianCloud &cloud, std::span<const std::size_t> indices,
                                           const SplitTable &table, double shift,
                                           std::span<const std::size_t> pending_prune) {
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidParameter("split_gaussians: duplicate index");
    }
    for (const std::size_t m : sorted) {
        if (m >= cloud.size()) {
            throw InvalidParameter("split_gaussians: index out of range");
        }
        if (std::find(pending_prune.begin(), pending_prune.end(), m) != pending_prune.end()) {
            throw ConsistencyError("split_gaussians: Gaussian " + std::to_string(m) + " is scheduled for pruning");
        }
    }

    std::vector<SplitChildren> out;
    out.reserve(sorted.size());
    for (const std::size_t m : sorted) {
        const Vec3 sizes = cloud.sizes[m];
        int axis = 0;
        for (int k = 1; k < 3; ++k) {
            if (sizes[k] > sizes[axis]) {
                axis = k;
            }
        }
        const double sigma_max = sizes[axis];
        const Vec3 u = quaternion_to_rotation(cloud.rotations[m]).col(axis);
        const SplitTable::Entry e = table.lookup(cloud.opacity(m));
        const double child_logit = logit(std::clamp(e.child_opacity, 1e-9, 1.0 - 1e-9));

        const std::size_t twin = cloud.append_copy(m);
        const Vec3 offset = shift * sigma_max * u;
        const Vec3 center = cloud.positions[m];
        cloud.positions[m] = center + offset;
        cloud.positions[twin] = center - offset;
        for (const std::size_t c : {m, twin}) {
            cloud.sizes[c][axis] = e.size_scale * sigma_max;
            cloud.opacity_logits[c] = child_logit;
        }
        out.push_back({m, {m, twin}});
    }
    return out;
}

BudgetSchedule::BudgetSchedule(std::size_t initial, std::size_t budget, int events)
    : initial_(initial), budget_(budget), events_(events) {
    if (initial == 0) {
        throw InvalidParameter("BudgetSchedule: initial count must be positive");
    }
    if (events < 1) {
        throw InvalidParameter("BudgetSchedule: need at least one event");
    }
}

std::size_t BudgetSchedule::target(int event) const {
    if (event >= events_ - 1 || budget_ <= initial_) {
        return budget_;
    }
    if (event < 0) {
        return initial_;
    }
    const double ratio = static_cast<double>(budget_) / static_cast<double>(initial_);
    const double frac = static_cast<double>(event + 1) / static_cast<double>(events_);
    const auto t = static_cast<std::size_t>(std::llround(static_cast<double>(initial_) * std::pow(ratio, frac)));
    return std::min(t, budget_);
}

namespace {

/// Indices of the k highest scores (ties by lower index), restricted to score > min_score.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k, double min_score) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > min_score) {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (order.size() > k) {
        order.resize(k);
    }
    return order;
}

} // namespace

DensifyReport densify_step(GaussianCloud &cloud, AdamState &state, const DensifyAccumulators &acc,
                           std::size_t target_count, const SplitTable &table, std::span<const Camera> cameras,
                           const DensifySettings &settings, std::vector<double> &deltas) {
    state.check_aligned(cloud);
    if (acc.gaussian_count() != cloud.size()) {
        throw ConsistencyError("densify_step: accumulators do not match the Gaussian count");
    }
    DensifyReport report;
    report.old_count = cloud.size();

    // Pruning.
    if (settings.effective_opacity_pruning) {
        report.prune_scores = effective_opacity(acc);
        report.pruned_indices =
            select_prune(report.prune_scores, settings.tau_prune, settings.max_prune_fraction, cloud.size());
    } else {
        report.prune_scores.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            report.prune_scores[i] = cloud.opacity(i);
        }
        report.pruned_indices = select_prune(report.prune_scores, settings.fallback_min_opacity, 1.0, cloud.size());
    }
    // Never empty the cloud.
    if (report.pruned_indices.size() == cloud.size() && !report.pruned_indices.empty()) {
        report.pruned_indices.pop_back();
    }

    if (settings.snr_prioritization) {
        report.split_scores = snr_priority(acc);
    } else {
        report.split_scores.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            report.split_scores[i] = cloud.opacity(i);
        }
    }

    std::vector<std::uint8_t> keep(cloud.size(), 1);
    for (const std::size_t i : report.pruned_indices) {
        keep[i] = 0;
    }
    std::vector<double> survivor_scores;
    survivor_scores.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (keep[i]) {
            survivor_scores.push_back(report.split_scores[i]);
        }
    }
    cloud.remove(report.pruned_indices);
    state.remove(report.pruned_indices);

    // Splitting. The allowance is measured against the count the event started with.
    const std::size_t allowed = target_count > report.old_count ? target_count - report.old_count : 0;
    report.split_indices = top_k(survivor_scores, allowed, 0.0);
    std::sort(report.split_indices.begin(), report.split_indices.end());
    const std::size_t before_split = cloud.size();
    const auto children = split_gaussians(cloud, report.split_indices, table, settings.split_shift);
    state.append(cloud.size() - before_split);
    for (const SplitChildren &sc : children) {
        if (settings.state_inheritance) {
            inherit_states(state, sc.mother, sc.children, settings.inherit_lifespan, settings.inherit_gradient);
        } else {
            inherit_states(state, sc.mother, sc.children, 0.0, 0.0);
        }
    }

    deltas = compute_deltas(cloud, cameras, settings.precision);
    min_size_clamp(cloud, deltas, settings.beta_min);
    report.new_count = cloud.size();
    return report;
}

void GradientAccumulator::reset(std::size_t gaussians) {
    sum_.assign(gaussians, 0.0);
    count_.assign(gaussians, 0);
}

void GradientAccumulator::add(const CloudGradients &grads) {
    if (grads.size() != sum_.size()) {
        throw ConsistencyError("GradientAccumulator::add: gradient count mismatch");
    }
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        if (grads.touched[i]) {
            sum_[i] += grads.mean2d_grad_norm[i];
            ++count_[i];
        }
    }
}

std::vector<double> GradientAccumulator::average() const {
    std::vector<double> avg(sum_.size(), 0.0);
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        if (count_[i] > 0) {
            avg[i] = sum_[i] / static_cast<double>(count_[i]);
        }
    }
    return avg;
}

namespace {

void zero_states(AdamState &state, std::size_t i) {
    for (int g = 0; g < kParamGroupCount; ++g) {
        state.reset_group(i, static_cast<ParamGroupId>(g));
    }
    state.lifespan[i] = 0;
}

} // namespace

DensifyReport vanilla_densify_step(GaussianCloud &cloud, VanillaAdam &optimizer, const GradientAccumulator &grads,
                                   std::size_t target_count, const VanillaDensifySettings &settings,
                                   std::mt19937_64 &rng) {
    AdamState &state = optimizer.state;
    state.check_aligned(cloud);
    if (grads.size() != cloud.size()) {
        throw ConsistencyError("vanilla_densify_step: accumulator does not match the Gaussian count");
    }
    DensifyReport report;
    report.old_count = cloud.size();
    report.split_scores = grads.average();

    const std::size_t allowed = target_count > cloud.size() ? target_count - cloud.size() : 0;
    std::vector<std::size_t> chosen = top_k(report.split_scores, allowed, 0.0);
    std::sort(chosen.begin(), chosen.end());
    report.split_indices = chosen;

    const double clone_limit = settings.percent_dense * settings.scene_extent;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const std::size_t m : chosen) {
        const std::size_t twin = cloud.append_copy(m);
        state.append(1);
        zero_states(state, twin);
        if (cloud.sizes[m].maxCoeff() <= clone_limit) {
            continue;
        }
        const Mat3 rot = quaternion_to_rotation(cloud.rotations[m]);
        const Vec3 center = cloud.positions[m];
        const Vec3 sizes = cloud.sizes[m];
        for (const std::size_t c : {m, twin}) {
            const Vec3 z(normal(rng), normal(rng), normal(rng));
            cloud.positions[c] = center + rot * sizes.cwiseProduct(z);
            cloud.sizes[c] = sizes / settings.split_size_divisor;
        }
        zero_states(state, m);
    }

    report.prune_scores.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        report.prune_scores[i] = cloud.opacity(i);
    }
    report.pruned_indices = select_prune(report.prune_scores, settings.prune_min_opacity, 1.0, cloud.size());
    if (report.pruned_indices.size() == cloud.size() && !report.pruned_indices.empty()) {
        report.pruned_indices.pop_back();
    }
    cloud.remove(report.pruned_indices);
    state.remove(report.pruned_indices);
    report.new_count = cloud.size();
    return report;
}

void reset_opacity(GaussianCloud &cloud, VanillaAdam &optimizer, double max_opacity) {
    optimizer.state.check_aligned(cloud);
    const double cap = logit(max_opacity);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        cloud.opacity_logits[i] = std::min(cloud.opacity_logits[i], cap);
        optimizer.state.reset_group(i, ParamGroupId::kOpacity);
    }
}

} // namespace gsopt
