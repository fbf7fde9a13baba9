#include <gsopt/core/errors.hpp>
#include <gsopt/io/image_io.hpp>
#include <gsopt/precision/precision.hpp>
#include <gsopt/train/loss.hpp>
#include <gsopt/train/trainer.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace gsopt {

void disable_feature(AblationFlags &flags, const std::string &token) {
    if (token == "sparse-adam") {
        flags.sparse_adam = false;
    } else if (token == "state-inheritance") {
        flags.state_inheritance = false;
    } else if (token == "scaled-updates") {
        flags.scaled_updates = false;
    } else if (token == "effective-opacity-pruning") {
        flags.effective_opacity_pruning = false;
    } else if (token == "snr-prioritization") {
        flags.snr_prioritization = false;
    } else {
        throw ConfigError("unknown ablation '" + token + "'");
    }
}

std::size_t budget_from_fraction(double fraction, std::size_t initial) {
    if (!(fraction > 0.0) || !std::isfinite(fraction)) {
        throw ConfigError("budget fraction must be positive");
    }
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(initial)));
}

int TrainConfig::resolved_densify_end() const {
    return densify_end.value_or(static_cast<int>(std::lround(0.6 * total_iters)));
}

void TrainConfig::validate() const {
    if (total_iters < 1) {
        throw ConfigError("total_iters must be positive");
    }
    if (!(loss_lambda >= 0.0 && loss_lambda <= 1.0)) {
        throw ConfigError("loss_lambda must lie in [0, 1]");
    }
    if (densify_interval < 1) {
        throw ConfigError("densify_interval must be positive");
    }
    const int end = resolved_densify_end();
    if (densify && !(densify_start < end && end <= total_iters)) {
        throw ConfigError("densification window must satisfy densify_start < densify_end <= total_iters");
    }
    if (!(position_lr_final_ratio > 0.0 && position_lr_final_ratio <= 1.0)) {
        throw ConfigError("position_lr_final_ratio must lie in (0, 1]");
    }
    if (trace_interval < 1) {
        throw ConfigError("trace_interval must be positive");
    }
    if (baseline_mode && opacity_reset_interval < 1) {
        throw ConfigError("opacity_reset_interval must be positive");
    }
}

namespace {

bool is_event(const TrainConfig &c, int it) {
    return c.densify && it % c.densify_interval == 0 && it >= c.densify_start && it <= c.resolved_densify_end();
}

int count_events(const TrainConfig &c) {
    int n = 0;
    for (int it = 1; it <= c.total_iters; ++it) {
        n += is_event(c, it) ? 1 : 0;
    }
    return n;
}

double position_lr_scale(const TrainConfig &c, int it) {
    if (c.total_iters <= 1) {
        return 1.0;
    }
    const double t = static_cast<double>(it - 1) / static_cast<double>(c.total_iters - 1);
    return std::pow(c.position_lr_final_ratio, t);
}

} // namespace

TrainResult train(const TrainConfig &config, const Scene &scene, const GaussianCloud *initial,
                  const TrainObserver &observer) {
    config.validate();
    scene.validate();
    if (!initial) {
        if (!scene.initial) {
            throw ConfigError("scene has no initial Gaussian cloud");
        }
        initial = &*scene.initial;
    }
    if (initial->size() == 0) {
        throw ConfigError("initial Gaussian cloud is empty");
    }
    initial->validate();
    const std::size_t budget = config.budget.value_or(initial->size());
    if (budget < initial->size()) {
        throw ConfigError("budget " + std::to_string(budget) + " is below the initial count " +
                          std::to_string(initial->size()));
    }

    TrainResult result;
    result.cloud = *initial;
    GaussianCloud &cloud = result.cloud;
    const std::vector<Camera> train_cams = scene.train_cameras();
    const Camera &probe = scene.test.empty() ? scene.cameras[scene.train.front()] : scene.cameras[scene.test.front()];
    const int sh_stride = cloud.sh_stride();

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train_cams.size() - 1);

    const int events = count_events(config);
    const BudgetSchedule schedule(cloud.size(), budget, std::max(events, 1));
    int event = 0;

    OptimizerConfig opt = config.optimizer;
    opt.sparse = config.ablation.sparse_adam;
    opt.scaled_updates = config.ablation.scaled_updates;
    DensifySettings dens = config.densify_settings;
    dens.effective_opacity_pruning = config.ablation.effective_opacity_pruning;
    dens.snr_prioritization = config.ablation.snr_prioritization;
    dens.state_inheritance = config.ablation.state_inheritance;
    dens.beta_min = opt.beta_min;

    AdamState state;
    VanillaAdam vanilla;
    std::vector<double> deltas;
    DensifyAccumulators acc;
    GradientAccumulator grad_acc;
    SplitTable table;
    const double extent = scene_extent(train_cams);
    VanillaDensifySettings vdens = config.vanilla_densify;
    vdens.scene_extent = extent;
    std::mt19937_64 densify_rng(config.seed ^ 0xd1b54a32d192ed03ULL);

    if (config.baseline_mode) {
        vanilla = VanillaAdam(sh_stride, cloud.size());
        grad_acc.reset(cloud.size());
    } else {
        state = AdamState(sh_stride, cloud.size());
        deltas = compute_deltas(cloud, train_cams, dens.precision);
        min_size_clamp(cloud, deltas, opt.beta_min);
        acc.reset(train_cams.size(), cloud.size());
        if (config.densify && events > 0) {
            table = learn_split_table(config.split_table);
        }
    }

    ExposureParams exposure(config.exposure_enabled ? train_cams.size() : 0);
    ExposureOptimizer exposure_opt(config.exposure_enabled ? train_cams.size() : 0, config.exposure_lr);

    double loss_since_trace = 0.0;
    int iters_since_trace = 0;
    std::size_t pruned_since_trace = 0, split_since_trace = 0;
    result.max_count = cloud.size();
    result.losses.reserve(static_cast<std::size_t>(config.total_iters));

    for (int it = 1; it <= config.total_iters; ++it) {
        const std::size_t k = pick(rng);
        const Camera &cam = train_cams[k];
        RenderResult r = render_forward(cloud, cam, config.render);

        const Image *rendered = &r.output.image;
        Image corrected;
        if (config.exposure_enabled) {
            corrected = apply_exposure(r.output.image, exposure, k);
            rendered = &corrected;
        }
        LossResult loss = compute_loss(*rendered, cam.gt_image, config.loss_lambda);
        Image grad_image;
        if (config.exposure_enabled) {
            Mat34 grad_t = Mat34::Zero();
            grad_image = exposure_backward(r.output.image, exposure.transforms[k], loss.grad, grad_t);
            exposure_opt.step(exposure, k, grad_t);
        } else {
            grad_image = std::move(loss.grad);
        }
        const CloudGradients grads = render_backward(cloud, cam, r.output, grad_image);

        const double lr_scale = position_lr_scale(config, it);
        if (config.baseline_mode) {
            grad_acc.add(grads);
            vanilla.step(cloud, grads, config.vanilla, lr_scale * extent);
        } else {
            accumulate_squared_error(r.output, *rendered, cam.gt_image, r.aux.se_sum);
            acc.add(k, r.aux);
            result.rejected_steps += step_sparse(cloud, state, grads, deltas, opt, lr_scale).rejected;
        }

        if (is_event(config, it)) {
            const std::size_t target = schedule.target(event);
            DensifyReport report;
            if (config.baseline_mode) {
                report = vanilla_densify_step(cloud, vanilla, grad_acc, target, vdens, densify_rng);
                grad_acc.reset(cloud.size());
            } else {
                report = densify_step(cloud, state, acc, target, table, train_cams, dens, deltas);
                acc.reset(train_cams.size(), cloud.size());
            }
            pruned_since_trace += report.pruned_indices.size();
            split_since_trace += report.split_indices.size();
            result.densify_reports.push_back(std::move(report));
            ++event;
        }
        if (config.baseline_mode && config.densify && it % config.opacity_reset_interval == 0 &&
            it < config.resolved_densify_end()) {
            reset_opacity(cloud, vanilla);
        }

        result.losses.push_back(loss.loss);
        result.max_count = std::max(result.max_count, cloud.size());
        loss_since_trace += loss.loss;
        ++iters_since_trace;
        if (it % config.trace_interval == 0 || it == config.total_iters) {
            TraceRow row;
            row.iter = it;
            row.loss = loss_since_trace / iters_since_trace;
            row.psnr_probe = psnr(render_forward(cloud, probe, config.render).output.image, probe.gt_image);
            row.count = cloud.size();
            row.pruned = pruned_since_trace;
            row.split = split_since_trace;
            result.trace.push_back(row);
            loss_since_trace = 0.0;
            iters_since_trace = 0;
            pruned_since_trace = split_since_trace = 0;
        }
        if (observer) {
            observer(it, cloud);
        }
    }
    result.exposure = std::move(exposure);
    return result;
}

EvalResult evaluate(const GaussianCloud &cloud, const std::vector<Camera> &cameras, const EvalSettings &settings) {
    EvalResult out;
    if (cameras.empty()) {
        return out;
    }
    double sum_psnr = 0.0, sum_ssim = 0.0, sum_psnr_e = 0.0, sum_ssim_e = 0.0;
    for (const Camera &cam : cameras) {
        Image img = render_forward(cloud, cam, settings.render).output.image;
        if (settings.quantize) {
            img = png_round_trip(img);
        }
        ViewMetrics v;
        v.camera_id = cam.id;
        v.psnr = psnr(img, cam.gt_image);
        v.ssim = ssim(img, cam.gt_image);
        if (settings.with_exposure) {
            Image corrected = apply_exposure(img, fit_exposure(img, cam.gt_image));
            if (settings.quantize) {
                corrected = png_round_trip(corrected);
            }
            v.psnr_exposure = psnr(corrected, cam.gt_image);
            v.ssim_exposure = ssim(corrected, cam.gt_image);
            sum_psnr_e += *v.psnr_exposure;
            sum_ssim_e += *v.ssim_exposure;
        }
        sum_psnr += v.psnr;
        sum_ssim += v.ssim;
        out.views.push_back(v);
    }
    const double n = static_cast<double>(cameras.size());
    out.mean_psnr = sum_psnr / n;
    out.mean_ssim = sum_ssim / n;
    if (settings.with_exposure) {
        out.mean_psnr_exposure = sum_psnr_e / n;
        out.mean_ssim_exposure = sum_ssim_e / n;
    }
    return out;
}

} // namespace gsopt
