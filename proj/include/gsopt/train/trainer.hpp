#pragma once

#include <gsopt/densify/densify.hpp>
#include <gsopt/densify/split_table.hpp>
#include <gsopt/optim/optimizer.hpp>
#include <gsopt/render/renderer.hpp>
#include <gsopt/train/exposure.hpp>
#include <gsopt/train/scene.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gsopt {

/// Feature switches of the full pipeline; each can be turned off on its own.
struct AblationFlags {
    bool sparse_adam = true;
    bool state_inheritance = true;
    bool scaled_updates = true;
    bool effective_opacity_pruning = true;
    bool snr_prioritization = true;

    friend bool operator==(const AblationFlags &, const AblationFlags &) = default;
};

/// Command-line tokens of the ablation flags, in declaration order.
inline constexpr const char *kAblationTokens[] = {"sparse-adam", "state-inheritance", "scaled-updates",
                                                  "effective-opacity-pruning", "snr-prioritization"};

/// Turns off the feature named by `token`; throws ConfigError on unknown tokens.
void disable_feature(AblationFlags &flags, const std::string &token);

/// round(fraction * initial); budgets are stated relative to the initial count.
std::size_t budget_from_fraction(double fraction, std::size_t initial);

struct TrainConfig {
    int total_iters = 30000;
    int densify_interval = 500;
    int densify_start = 500;
    /// Defaults to 60% of total_iters.
    std::optional<int> densify_end;
    /// Target Gaussian count; defaults to the initial count (no growth).
    std::optional<std::size_t> budget;
    double loss_lambda = 0.2;
    bool exposure_enabled = false;
    double exposure_lr = 1e-3;
    std::uint64_t seed = 0;
    AblationFlags ablation;
    bool baseline_mode = false;
    /// Run densification events at all (off for pure optimization runs).
    bool densify = true;

    OptimizerConfig optimizer;
    /// Position learning rate decays log-linearly to this fraction at the last iteration.
    double position_lr_final_ratio = 0.01;
    DensifySettings densify_settings;
    SplitTableSettings split_table;

    VanillaAdamConfig vanilla;
    VanillaDensifySettings vanilla_densify;
    /// Opacity reset period of the baseline, in iterations.
    int opacity_reset_interval = 1500;

    RenderSettings render;
    int trace_interval = 100;

    int resolved_densify_end() const;
    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

struct TraceRow {
    int iter = 0;
    double loss = 0.0;
    double psnr_probe = 0.0;
    std::size_t count = 0;
    /// Gaussians pruned / split since the previous row.
    std::size_t pruned = 0;
    std::size_t split = 0;

    friend bool operator==(const TraceRow &, const TraceRow &) = default;
};

struct TrainResult {
    GaussianCloud cloud;
    std::vector<TraceRow> trace;
    /// Loss of every iteration, in order.
    std::vector<double> losses;
    ExposureParams exposure;
    /// Largest Gaussian count observed after any iteration.
    std::size_t max_count = 0;
    std::size_t rejected_steps = 0;
    /// One report per densification event, in order.
    std::vector<DensifyReport> densify_reports;
};

/// Optional per-iteration observer: (iteration, cloud).
using TrainObserver = std::function<void(int, const GaussianCloud &)>;

/// Trains `initial` (or scene.initial when null) on the scene's training cameras.
TrainResult train(const TrainConfig &config, const Scene &scene, const GaussianCloud *initial = nullptr,
                  const TrainObserver &observer = {});

struct ViewMetrics {
    int camera_id = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    /// With a per-view affine color fit to the ground truth; present when requested.
    std::optional<double> psnr_exposure;
    std::optional<double> ssim_exposure;
};

struct EvalResult {
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::optional<double> mean_psnr_exposure;
    std::optional<double> mean_ssim_exposure;
};

struct EvalSettings {
    bool with_exposure = false;
    /// Pass renders through the 8-bit PNG encoding before scoring (ground truth loaded from PNG).
    bool quantize = false;
    RenderSettings render;
};

EvalResult evaluate(const GaussianCloud &cloud, const std::vector<Camera> &cameras, const EvalSettings &settings = {});

} // namespace gsopt
