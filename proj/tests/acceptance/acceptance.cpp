// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero if any criterion fails.

#include "test_support.hpp"

#include <gsopt/core/geometry.hpp>
#include <gsopt/densify/densify.hpp>
#include <gsopt/io/image_io.hpp>
#include <gsopt/io/ply.hpp>
#include <gsopt/io/records.hpp>
#include <gsopt/optim/optimizer.hpp>
#include <gsopt/precision/precision.hpp>
#include <gsopt/train/trainer.hpp>

#include <Eigen/Geometry>
#include <tbb/global_control.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace gsopt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1 ---------------------------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> count(1, 5), degree(0, 3);
    int accepted = 0, attempts = 0;
    double worst = 0.0;
    std::string worst_group;
    while (accepted < 25 && attempts < 1000) {
        ++attempts;
        const GaussianCloud cloud = testkit::random_cloud(rng, static_cast<std::size_t>(count(rng)), degree(rng));
        const Camera cam = testkit::front_camera(8, 8, 9.0);
        const Image w = testkit::random_image(rng, 8, 8);
        const auto check = testkit::check_render_gradients(cloud, cam, w);
        if (!check.smooth) {
            continue;
        }
        ++accepted;
        for (const auto &[group, err] : check.group_errors) {
            if (err > worst) {
                worst = err;
                worst_group = group;
            }
        }
    }
    const double elapsed = seconds_since(t0);
    Outcome o;
    o.pass = accepted >= 20 && worst < 1e-4 && elapsed < 60.0;
    o.detail = std::to_string(accepted) + " scenes, max group-relative error " + fmt(worst) + " (" + worst_group +
               "), " + fmt(elapsed, 3) + " s";
    return o;
}

// 2 ---------------------------------------------------------------------------------------------

Outcome optimizer_unbiasedness() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    OptimizerConfig cfg;
    const std::vector<double> deltas = {1.0};
    // 1/t >= 1 - beta holds for t <= 10 (beta1 = 0.9) on the first moment and t <= 1000 on the second.
    const int t1 = static_cast<int>(std::floor(1.0 / (1.0 - cfg.beta1) + 1e-9));
    const int t2 = static_cast<int>(std::floor(1.0 / (1.0 - cfg.beta2) + 1e-9));
    double worst_mean = 0.0, worst_sq = 0.0;
    for (int seq = 0; seq < 1000; ++seq) {
        GaussianCloud cloud(0, 1);
        AdamState state(cloud.sh_stride(), 1);
        long double sum = 0.0L, sum_sq = 0.0L;
        const int steps = seq < 50 ? t2 : t1;
        for (int t = 1; t <= steps; ++t) {
            CloudGradients g(1, cloud.sh_stride());
            g.touched[0] = 1;
            g.opacity_logits[0] = n(rng) * std::exp(n(rng));
            sum += g.opacity_logits[0];
            sum_sq += static_cast<long double>(g.opacity_logits[0]) * g.opacity_logits[0];
            step_sparse(cloud, state, g, deltas, cfg);
            const auto &m = state.moments(ParamGroupId::kOpacity);
            if (t <= t1) {
                const double mean = static_cast<double>(sum / t);
                worst_mean = std::max(worst_mean, std::abs(m.g_hat[0] - mean) / std::max(1.0, std::abs(mean)));
            }
            const double mean_sq = static_cast<double>(sum_sq / t);
            worst_sq = std::max(worst_sq, std::abs(m.g2_hat[0] - mean_sq) / std::max(1.0, mean_sq));
        }
    }
    // Constant gradient: bit-exact fixed point at every step.
    bool constant_exact = true;
    for (const double value : {0.37, -2.5, 1e-6, 123.0}) {
        GaussianCloud cloud(0, 1);
        AdamState state(cloud.sh_stride(), 1);
        for (int t = 1; t <= 3000; ++t) {
            CloudGradients g(1, cloud.sh_stride());
            g.touched[0] = 1;
            g.positions[0] = Vec3::Constant(value);
            step_sparse(cloud, state, g, deltas, cfg);
            const auto &m = state.moments(ParamGroupId::kPosition);
            for (int k = 0; k < 3; ++k) {
                constant_exact = constant_exact && m.g_hat[k] == value && m.g2_hat[k] == value * value;
            }
        }
    }
    Outcome o;
    o.pass = worst_mean < 1e-13 && worst_sq < 1e-13 && constant_exact;
    o.detail = "running-mean deviation " + fmt(worst_mean) + " (first moment), " + fmt(worst_sq) +
               " (second moment, round-off only); constant g exact: " + (constant_exact ? "yes" : "no");
    return o;
}

// 3 ---------------------------------------------------------------------------------------------

Outcome sparse_dense_equivalence() {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    const GaussianCloud start = testkit::random_cloud(rng, 4, 2);
    GaussianCloud a = start, b = start;
    AdamState sa(a.sh_stride(), a.size()), sb(b.sh_stride(), b.size());
    OptimizerConfig sparse_cfg, dense_cfg;
    dense_cfg.sparse = false;
    const std::vector<double> deltas = {0.02, 0.05, 0.01, 0.03};
    bool identical = true;
    bool others_differ = false;
    for (int t = 0; t < 1000; ++t) {
        CloudGradients g(a.size(), a.sh_stride());
        for (std::size_t i = 0; i < a.size(); ++i) {
            g.touched[i] = i == 0 || coin(rng);
            if (!g.touched[i]) {
                continue;
            }
            g.positions[i] = Vec3(n(rng), n(rng), n(rng));
            g.sizes[i] = Vec3(n(rng), n(rng), n(rng));
            g.rotations[i] = Vec4(n(rng), n(rng), n(rng), n(rng));
            g.opacity_logits[i] = n(rng);
            for (int k = 0; k < a.sh_stride(); ++k) {
                g.sh[i * a.sh_stride() + k] = n(rng);
            }
        }
        step_sparse(a, sa, g, deltas, sparse_cfg);
        step_sparse(b, sb, g, deltas, dense_cfg);
        identical = identical && a.positions[0] == b.positions[0] && a.sizes[0] == b.sizes[0] &&
                    a.rotations[0] == b.rotations[0] && a.opacity_logits[0] == b.opacity_logits[0] &&
                    std::equal(a.sh.begin(), a.sh.begin() + a.sh_stride(), b.sh.begin());
    }
    for (std::size_t i = 1; i < a.size(); ++i) {
        others_differ = others_differ || a.positions[i] != b.positions[i];
    }
    Outcome o;
    o.pass = identical;
    o.detail = std::string("always-touched Gaussian bit-identical over 1000 steps: ") + (identical ? "yes" : "no") +
               "; intermittently touched Gaussians diverge: " + (others_differ ? "yes" : "no");
    return o;
}

// 4 ---------------------------------------------------------------------------------------------

Outcome split_table_dominance() {
    const SplitTable table = learn_split_table();
    double worst_ratio = 0.0;
    std::size_t violations = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double o = table.opacity_grid[i];
        const double learned = testkit::simpson_split_residual(o, table.size_scale[i], table.child_opacity[i], true);
        const double naive = testkit::simpson_split_residual(o, 1.0 / 1.6, o, true);
        worst_ratio = std::max(worst_ratio, learned / naive);
        violations += learned > naive ? 1 : 0;
    }
    // Geometry: mother with sizes (2, 1, 1) along x at the origin.
    GaussianCloud cloud(0, 1);
    cloud.sizes[0] = Vec3(2.0, 1.0, 1.0);
    cloud.opacity_logits[0] = logit(0.5);
    const auto kids = split_gaussians(cloud, std::vector<std::size_t>{0}, table);
    const Vec3 p0 = cloud.positions[kids[0].children[0]], p1 = cloud.positions[kids[0].children[1]];
    const bool geometry = std::abs(p0.x() - 0.6) < 1e-15 && std::abs(p1.x() + 0.6) < 1e-15 &&
                          p0.tail<2>().isZero() && p1.tail<2>().isZero() &&
                          cloud.sizes[kids[0].children[0]].tail<2>() == Vec2(1.0, 1.0);
    Outcome o;
    o.pass = violations == 0 && geometry;
    o.detail = std::to_string(table.size()) + " nodes, " + std::to_string(violations) +
               " worse than naive split (max learned/naive residual " + fmt(worst_ratio) +
               "); children at x = " + fmt(p0.x()) + ", " + fmt(p1.x());
    return o;
}

// 5 ---------------------------------------------------------------------------------------------

Outcome psnr_approximation() {
    double worst = 0.0;
    for (const double share : {0.01, 0.05, 0.1}) {
        for (const double a : {0.3, 0.5, 0.7}) {
            const double exact = psnr_gain_exact(share, a);
            worst = std::max(worst, std::abs(psnr_gain_first_order(share, a) - exact) / exact);
        }
    }
    // Ranking invariance under per-camera rescaling of the squared errors.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> log_scale(-6.0, 6.0);
    bool invariant = true;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t cams = 6, n = 50;
        DensifyAccumulators a(cams, n), b(cams, n);
        for (std::size_t c = 0; c < cams; ++c) {
            // Powers of two keep the rescaled sums exact.
            const double scale = std::ldexp(1.0, static_cast<int>(std::lround(log_scale(rng))));
            for (std::size_t i = 0; i < n; ++i) {
                const double se = u(rng) < 0.2 ? 0.0 : u(rng);
                a.set(c, i, 0.0, 0, se);
                b.set(c, i, 0.0, 0, se * scale);
            }
        }
        const auto sa = snr_priority(a), sb = snr_priority(b);
        std::vector<std::size_t> ra(n), rb(n);
        std::iota(ra.begin(), ra.end(), 0);
        std::iota(rb.begin(), rb.end(), 0);
        std::stable_sort(ra.begin(), ra.end(), [&](auto x, auto y) { return sa[x] > sa[y]; });
        std::stable_sort(rb.begin(), rb.end(), [&](auto x, auto y) { return sb[x] > sb[y]; });
        invariant = invariant && ra == rb && sa == sb;
    }
    Outcome o;
    o.pass = worst < 0.05 && invariant;
    o.detail = "max relative gap first-order vs exact " + fmt(100.0 * worst, 3) + "%; ranking invariant to camera " +
               "rescaling: " + (invariant ? "yes" : "no");
    return o;
}

// 6 ---------------------------------------------------------------------------------------------

Outcome pruning_contract() {
    // Constructed score vectors.
    bool constructed = true;
    {
        const std::vector<double> s = {0.5, 0.01, 0.3};
        constructed = constructed && select_prune(s, 0.02, 0.01, 3) == std::vector<std::size_t>{1};
    }
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 0.05);
    for (const std::size_t n : {50u, 100u, 250u, 1000u, 4321u}) {
        std::vector<double> s(n);
        for (double &v : s) {
            v = u(rng);
        }
        const auto pruned = select_prune(s, 0.02, 0.01, n);
        const auto cap = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(n) - 1e-9));
        std::size_t below = 0;
        for (const double v : s) {
            below += v < 0.02 ? 1 : 0;
        }
        constructed = constructed && pruned.size() == std::min(cap, below);
        double max_pruned = 0.0;
        for (const std::size_t i : pruned) {
            constructed = constructed && s[i] < 0.02;
            max_pruned = std::max(max_pruned, s[i]);
        }
        // Everything kept below the threshold scores at least as high as everything pruned.
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] < 0.02 && !std::binary_search(pruned.begin(), pruned.end(), i)) {
                constructed = constructed && s[i] >= max_pruned;
            }
        }
    }

    // End to end: a small Gaussian at the center of a closed box of opaque flat Gaussians. The box is part
    // of the ground truth, so training keeps it opaque and every camera sees the box face in front of it.
    SynthSettings ss;
    ss.seed = 1;
    Scene scene = synth_scene(ss);
    auto add_box = [](GaussianCloud &c) {
        for (int axis = 0; axis < 3; ++axis) {
            for (const double side : {-1.0, 1.0}) {
                const std::size_t f = c.append_copy(0);
                c.positions[f] = Vec3::Zero();
                c.positions[f][axis] = 0.1 * side;
                c.sizes[f] = Vec3::Constant(0.3);
                c.sizes[f][axis] = 0.005;
                c.rotations[f] = Vec4(1.0, 0.0, 0.0, 0.0);
                c.opacity_logits[f] = logit(0.999);
                auto sh = c.sh_of(f);
                for (auto &v : sh) {
                    v = 0.0;
                }
            }
        }
    };
    add_box(*scene.ground_truth);
    for (Camera &cam : scene.cameras) {
        cam.gt_image = render_forward(*scene.ground_truth, cam).output.image;
    }
    GaussianCloud init = *scene.initial;
    add_box(init);
    const std::size_t hidden = init.append_copy(0);
    init.positions[hidden] = Vec3::Zero();
    init.sizes[hidden] = Vec3::Constant(0.02);
    init.rotations[hidden] = Vec4(1.0, 0.0, 0.0, 0.0);
    init.opacity_logits[hidden] = logit(0.5);

    TrainConfig cfg;
    cfg.seed = 1;
    cfg.total_iters = 1000;
    cfg.densify_end = 1000;
    cfg.budget = 60;
    const TrainResult r = train(cfg, scene, &init);
    int pruned_at = -1;
    std::size_t index = hidden;
    for (std::size_t e = 0; e < r.densify_reports.size() && pruned_at < 0; ++e) {
        const auto &rep = r.densify_reports[e];
        if (std::getenv("GSOPT_ACCEPTANCE_VERBOSE")) {
            std::size_t lower = 0;
            for (const double v : rep.prune_scores) {
                lower += v < rep.prune_scores[index] ? 1 : 0;
            }
            std::cerr << "  event " << e + 1 << ": n=" << rep.old_count << " pruned=" << rep.pruned_indices.size()
                      << " occluded score=" << rep.prune_scores[index] << " rank=" << lower << std::endl;
        }
        if (std::binary_search(rep.pruned_indices.begin(), rep.pruned_indices.end(), index)) {
            pruned_at = static_cast<int>(e) + 1;
            break;
        }
        index -= static_cast<std::size_t>(
            std::lower_bound(rep.pruned_indices.begin(), rep.pruned_indices.end(), index) - rep.pruned_indices.begin());
    }
    Outcome o;
    o.pass = constructed && pruned_at >= 1 && pruned_at <= 2;
    o.detail = std::string("constructed vectors: ") + (constructed ? "ok" : "violated") +
               "; occluded Gaussian pruned at event " + (pruned_at > 0 ? std::to_string(pruned_at) : "never") +
               " of " + std::to_string(r.densify_reports.size());
    return o;
}

// 7 ---------------------------------------------------------------------------------------------

Camera unit_camera(const Vec3 &eye) {
    const Vec3 up = std::abs(eye.normalized().y()) > 0.9 ? Vec3(0, 0, 1) : Vec3(0, 1, 0);
    return Camera::look_at(eye, Vec3::Zero(), up, 2, 2, 1.0);
}

Outcome precision_module() {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    bool additive = true;
    for (int trial = 0; trial < 100; ++trial) {
        Camera cam = unit_camera(3.0 * Vec3(n(rng), n(rng), n(rng)).normalized());
        cam.fx = cam.fy = 50.0 + 10.0 * std::abs(n(rng));
        const Vec3 x = 0.3 * Vec3(n(rng), n(rng), n(rng));
        const std::vector<Camera> one = {cam}, two = {cam, cam};
        const auto a = fuse_precision(one, x), b = fuse_precision(two, x);
        additive = additive && b.precision == 2.0 * a.precision;
    }
    const std::vector<Camera> ortho = {unit_camera(Vec3(0, 0, -1)), unit_camera(Vec3(1, 0, 0))};
    const double delta = fuse_precision(ortho, Vec3::Zero()).delta;

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Mat3 rot = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
        std::vector<Camera> cams, rotated;
        for (int c = 0; c < 4; ++c) {
            Camera cam = unit_camera(3.0 * Vec3(n(rng), n(rng), n(rng)).normalized());
            cams.push_back(cam);
            cam.rotation = cam.rotation * rot.transpose();
            rotated.push_back(cam);
        }
        const Vec3 x = 0.3 * Vec3(n(rng), n(rng), n(rng));
        const auto a = fuse_precision(cams, x), b = fuse_precision(rotated, rot * x);
        worst = std::max(worst, (b.precision - rot * a.precision * rot.transpose()).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(a.delta - b.delta));
    }
    Outcome o;
    o.pass = additive && std::abs(delta - 1.0) < 1e-12 && worst < 1e-10;
    o.detail = std::string("duplicate-camera additivity exact: ") + (additive ? "yes" : "no") +
               "; orthogonal pair delta = " + fmt(delta, 17) + "; rotation equivariance error " + fmt(worst);
    return o;
}

// 8 and 9 ---------------------------------------------------------------------------------------

struct Arm {
    std::string name;
    std::function<void(TrainConfig &)> setup;
    double budget_fraction = 1.0;
};

struct Experiment {
    std::map<std::string, std::vector<double>> psnr;
    double seconds = 0.0;
};

Experiment run_desk_experiment() {
    std::vector<Arm> arms = {
        {"full", [](TrainConfig &) {}, 1.0},
        {"full-half-budget", [](TrainConfig &) {}, 0.5},
        {"baseline", [](TrainConfig &c) { c.baseline_mode = true; }, 1.0},
    };
    for (const char *token : kAblationTokens) {
        arms.push_back({std::string("no-") + token, [token](TrainConfig &c) { disable_feature(c.ablation, token); }, 1.0});
    }
    Experiment ex;
    const auto t0 = Clock::now();
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        SynthSettings ss;  // 200 Gaussians, 24 cameras, 96x96, 20 initial
        ss.seed = seed;
        const Scene scene = synth_scene(ss);
        for (const Arm &arm : arms) {
            const auto t = Clock::now();
            TrainConfig cfg;
            cfg.seed = seed;
            cfg.total_iters = 5000;
            cfg.budget = budget_from_fraction(arm.budget_fraction, 200);
            arm.setup(cfg);
            const TrainResult r = train(cfg, scene);
            const double p = evaluate(r.cloud, scene.test_cameras()).mean_psnr;
            ex.psnr[arm.name].push_back(p);
            std::cerr << "  seed " << seed << " " << arm.name << ": " << fmt(p, 5) << " dB, " << r.cloud.size()
                      << " Gaussians, " << fmt(seconds_since(t), 3) << " s" << std::endl;
        }
    }
    ex.seconds = seconds_since(t0);
    return ex;
}

Outcome desk_scale(const Experiment &ex) {
    const double full = median(ex.psnr.at("full"));
    const double half = median(ex.psnr.at("full-half-budget"));
    const double base = median(ex.psnr.at("baseline"));
    Outcome o;
    o.pass = full >= base && half >= base;
    o.detail = "median held-out PSNR: full@200 " + fmt(full, 5) + " dB, full@100 " + fmt(half, 5) +
               " dB, baseline@200 " + fmt(base, 5) + " dB; 24 runs took " + fmt(ex.seconds / 60.0, 3) + " min";
    return o;
}

Outcome ablations(const Experiment &ex) {
    const double full = median(ex.psnr.at("full"));
    bool pass = true;
    std::string detail = "full " + fmt(full, 5) + " dB";
    for (const char *token : kAblationTokens) {
        const double ab = median(ex.psnr.at(std::string("no-") + token));
        pass = pass && full >= ab - 0.1;
        detail += "; no-" + std::string(token) + " " + fmt(ab, 5);
    }
    return {pass, detail};
}

// 10 --------------------------------------------------------------------------------------------

Outcome determinism_and_formats() {
    SynthSettings ss;
    ss.gaussians = 60;
    ss.initial = 12;
    ss.cameras = 12;
    ss.image_size = 48;
    ss.seed = 4;
    const Scene scene = synth_scene(ss);
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.total_iters = 1500;
    cfg.budget = 60;
    cfg.trace_interval = 50;
    TrainResult one, many, again;
    {
        tbb::global_control g(tbb::global_control::max_allowed_parallelism, 1);
        one = train(cfg, scene);
    }
    {
        tbb::global_control g(tbb::global_control::max_allowed_parallelism, 4);
        many = train(cfg, scene);
    }
    again = train(cfg, scene);
    const bool deterministic = one.trace == many.trace && one.trace == again.trace &&
                               one.cloud.positions == many.cloud.positions && one.cloud.sh == many.cloud.sh;

    const fs::path dir = fs::temp_directory_path() / ("gsopt_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    // PLY: < 1e-6 after a float32 round trip.
    save_ply(one.cloud, (dir / "m.ply").string());
    const GaussianCloud back = load_ply((dir / "m.ply").string());
    double ply_err = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
        ply_err = std::max(ply_err, (back.positions[i] - one.cloud.positions[i]).cwiseAbs().maxCoeff());
        ply_err = std::max(ply_err, (back.sizes[i] - one.cloud.sizes[i]).cwiseAbs().maxCoeff());
        ply_err = std::max(ply_err, (back.rotations[i] - one.cloud.rotations[i]).cwiseAbs().maxCoeff());
        ply_err = std::max(ply_err, std::abs(back.opacity(i) - one.cloud.opacity(i)));
    }
    for (std::size_t k = 0; k < back.sh.size(); ++k) {
        ply_err = std::max(ply_err, std::abs(back.sh[k] - one.cloud.sh[k]));
    }
    // PNG: within half a quantization step of the stored (gamma-encoded) 8-bit values.
    const Image img = render_forward(one.cloud, scene.cameras[0]).output.image;
    save_png(img, (dir / "r.png").string());
    const Image png = load_png((dir / "r.png").string());
    double png_err = 0.0;
    for (std::size_t k = 0; k < img.data().size(); ++k) {
        png_err = std::max(png_err, std::abs(linear_to_encoded(img.data()[k]) - linear_to_encoded(png.data()[k])));
    }
    // CSV: exact.
    save_trace_csv(one.trace, (dir / "t.csv").string());
    const bool csv = load_trace_csv((dir / "t.csv").string()) == one.trace;
    save_split_table_csv(learn_split_table(), (dir / "s.csv").string());
    const bool table_csv = load_split_table_csv((dir / "s.csv").string()) == learn_split_table();
    fs::remove_all(dir);

    Outcome o;
    o.pass = deterministic && ply_err < 1e-6 && png_err <= 1.0 / 255.0 && csv && table_csv && png.same_shape(img) &&
             back.size() == one.cloud.size();
    o.detail = std::string("traces identical across 1/4 threads and reruns: ") + (deterministic ? "yes" : "no") +
               "; PLY max error " + fmt(ply_err) + "; PNG max error " + fmt(png_err * 255.0, 3) +
               "/255 (encoded); trace CSV exact: " + (csv ? "yes" : "no") + "; split-table CSV exact: " +
               (table_csv ? "yes" : "no");
    return o;
}

} // namespace

// Optional arguments select criteria by number; no arguments runs all of them.
int main(int argc, char **argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        only.insert(std::atoi(argv[i]));
    }
    auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };
    int failures = 0;
    auto report = [&](int id, const char *name, const Outcome &o) {
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
        failures += o.pass ? 0 : 1;
    };
    auto guarded = [](const std::function<Outcome()> &f) {
        try {
            return f();
        } catch (const std::exception &e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    if (wanted(1)) {
        report(1, "gradient fidelity", guarded(gradient_fidelity));
    }
    if (wanted(2)) {
        report(2, "optimizer unbiasedness", guarded(optimizer_unbiasedness));
    }
    if (wanted(3)) {
        report(3, "sparse/dense equivalence", guarded(sparse_dense_equivalence));
    }
    if (wanted(4)) {
        report(4, "split-table dominance", guarded(split_table_dominance));
    }
    if (wanted(5)) {
        report(5, "first-order PSNR gain", guarded(psnr_approximation));
    }
    if (wanted(6)) {
        report(6, "pruning contract", guarded(pruning_contract));
    }
    if (wanted(7)) {
        report(7, "precision module", guarded(precision_module));
    }

    if (wanted(8) || wanted(9)) {
        Experiment ex;
        std::string error;
        try {
            ex = run_desk_experiment();
        } catch (const std::exception &e) {
            error = "exception: " + std::string(e.what());
        }
        report(8, "desk-scale end-to-end", error.empty() ? desk_scale(ex) : Outcome{false, error});
        report(9, "ablation directionality", error.empty() ? ablations(ex) : Outcome{false, error});
    }
    if (wanted(10)) {
        report(10, "determinism and formats", guarded(determinism_and_formats));
    }

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
