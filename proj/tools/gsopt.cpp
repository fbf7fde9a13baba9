#include <gsopt/core/errors.hpp>
#include <gsopt/densify/split_table.hpp>
#include <gsopt/io/image_io.hpp>
#include <gsopt/io/ply.hpp>
#include <gsopt/io/records.hpp>
#include <gsopt/io/scene_io.hpp>
#include <gsopt/train/trainer.hpp>

#include <CLI11.hpp>
#include <tbb/global_control.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace gsopt;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out;
};

void add_common(CLI::App *cmd, Common &c, const std::string &out_help) {
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", c.out, out_help);
}

bool parse_on_off(const std::string &v) { return v == "on"; }

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::size_t resolve_budget(std::optional<std::size_t> budget, std::optional<double> fraction, std::size_t initial) {
    if (budget) {
        return *budget;
    }
    if (fraction) {
        return budget_from_fraction(*fraction, initial);
    }
    return initial;
}

void require_out(const std::string &out, const char *command) {
    if (out.empty()) {
        throw ConfigError(std::string(command) + ": --out is required");
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Gaussian splatting trainer with budgeted densification"};
    app.require_subcommand(1);

    Common common;

    // train
    auto *train_cmd = app.add_subcommand("train", "Train a Gaussian cloud on a scene");
    add_common(train_cmd, common, "Artifact directory");
    std::string scene_path;
    std::optional<std::size_t> budget;
    std::optional<double> budget_fraction;
    std::optional<int> iters;
    std::optional<std::string> exposure;
    std::string ablate;
    bool baseline = false;
    std::string init_ply;
    train_cmd->add_option("--scene", scene_path, "Scene manifest")->required()->check(CLI::ExistingFile);
    auto *budget_opt = train_cmd->add_option("--budget", budget, "Target Gaussian count");
    train_cmd->add_option("--budget-fraction", budget_fraction, "Budget as a fraction of the initial count")
        ->excludes(budget_opt);
    train_cmd->add_option("--iters", iters, "Training iterations")->check(CLI::PositiveNumber);
    train_cmd->add_option("--exposure", exposure, "Per-image exposure compensation")
        ->check(CLI::IsMember({"on", "off"}));
    train_cmd->add_option("--ablate", ablate, "Comma-separated features to disable");
    train_cmd->add_flag("--baseline", baseline, "Vanilla Adam with clone/split densification");
    train_cmd->add_option("--init", init_ply, "Initial cloud PLY (overrides the manifest)")
        ->check(CLI::ExistingFile);

    // render
    auto *render_cmd = app.add_subcommand("render", "Render one view of a cloud to PNG");
    add_common(render_cmd, common, "Output PNG");
    std::string ply_path;
    int view_id = 0;
    render_cmd->add_option("--ply", ply_path, "Gaussian cloud")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--scene", scene_path, "Scene manifest")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--view", view_id, "Camera id")->required();

    // eval
    auto *eval_cmd = app.add_subcommand("eval", "Score a cloud on the test views of a scene");
    add_common(eval_cmd, common, "Directory for metrics.json (stdout when omitted)");
    eval_cmd->add_option("--ply", ply_path, "Gaussian cloud")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--scene", scene_path, "Scene manifest")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--exposure", exposure, "Also report metrics after a per-view color fit")
        ->check(CLI::IsMember({"on", "off"}));

    // split-table
    auto *table_cmd = app.add_subcommand("split-table", "Learn the split table and write it as CSV");
    add_common(table_cmd, common, "Output CSV");
    std::string objective = "composited";
    table_cmd->add_option("--objective", objective, "Child fit objective")
        ->check(CLI::IsMember({"composited", "additive"}));

    // synth
    auto *synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene");
    add_common(synth_cmd, common, "Scene directory");
    SynthSettings synth;
    synth_cmd->add_option("--n", synth.gaussians, "Ground-truth Gaussians")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--cameras", synth.cameras, "Cameras on the ring")->check(CLI::Range(2, 100000));
    synth_cmd->add_option("--size", synth.image_size, "Image width and height")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--init", synth.initial, "Initial Gaussians (default n/10)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        std::unique_ptr<tbb::global_control> threads;
        if (common.threads > 0) {
            threads = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                            static_cast<std::size_t>(common.threads));
        }

        if (*train_cmd) {
            require_out(common.out, "train");
            Scene scene = load_scene(scene_path);
            if (!init_ply.empty()) {
                scene.initial = load_ply(init_ply);
            }
            if (!scene.initial) {
                throw ConfigError("train: the scene has no init_ply and --init was not given");
            }
            TrainConfig config;
            if (!common.config.empty()) {
                apply_train_config_json(read_json(common.config), config);
            }
            if (common.seed) {
                config.seed = *common.seed;
            }
            if (iters) {
                config.total_iters = *iters;
                config.densify_end.reset();
            }
            if (exposure) {
                config.exposure_enabled = parse_on_off(*exposure);
            }
            for (const auto &token : split_list(ablate)) {
                disable_feature(config.ablation, token);
            }
            if (baseline) {
                config.baseline_mode = true;
            }
            if (budget || budget_fraction || !config.budget) {
                config.budget = resolve_budget(budget, budget_fraction, scene.initial->size());
            }

            const TrainResult result = train(config, scene);
            const fs::path out(common.out);
            fs::create_directories(out / "renders");
            save_ply(result.cloud, (out / "model.ply").string());
            save_trace_csv(result.trace, (out / "metrics.csv").string());
            EvalSettings es;
            es.with_exposure = config.exposure_enabled;
            es.quantize = scene.images_quantized;
            const auto test_cams = scene.test_cameras();
            nlohmann::json metrics = eval_to_json(evaluate(result.cloud, test_cams, es));
            metrics["gaussians"] = result.cloud.size();
            write_json(metrics, (out / "metrics.json").string());
            write_json(train_config_to_json(config), (out / "config.json").string());
            for (const Camera &cam : test_cams) {
                save_png(render_forward(result.cloud, cam, config.render).output.image,
                         (out / "renders" / (std::to_string(cam.id) + ".png")).string());
            }
            std::cout << "trained " << result.cloud.size() << " Gaussians, test PSNR "
                      << metrics["mean_psnr"].get<double>() << " dB\n";
        } else if (*render_cmd) {
            require_out(common.out, "render");
            const Scene scene = load_scene(scene_path);
            const GaussianCloud cloud = load_ply(ply_path);
            const Camera *cam = nullptr;
            for (const Camera &c : scene.cameras) {
                if (c.id == view_id) {
                    cam = &c;
                }
            }
            if (!cam) {
                throw ConfigError("render: no camera with id " + std::to_string(view_id));
            }
            save_png(render_forward(cloud, *cam).output.image, common.out);
        } else if (*eval_cmd) {
            const Scene scene = load_scene(scene_path);
            const GaussianCloud cloud = load_ply(ply_path);
            EvalSettings es;
            es.with_exposure = exposure && parse_on_off(*exposure);
            es.quantize = scene.images_quantized;
            const auto cams = scene.test.empty() ? scene.train_cameras() : scene.test_cameras();
            const nlohmann::json metrics = eval_to_json(evaluate(cloud, cams, es));
            if (common.out.empty()) {
                std::cout << metrics.dump(2) << '\n';
            } else {
                fs::create_directories(common.out);
                write_json(metrics, (fs::path(common.out) / "metrics.json").string());
            }
        } else if (*table_cmd) {
            require_out(common.out, "split-table");
            SplitTableSettings ts;
            ts.objective = objective == "additive" ? SplitObjective::kAdditive : SplitObjective::kComposited;
            save_split_table_csv(learn_split_table(ts), common.out);
        } else if (*synth_cmd) {
            require_out(common.out, "synth");
            if (!common.config.empty()) {
                // Accept a config file for uniformity; synth reads only its own keys.
                const auto doc = read_json(common.config);
                if (doc.contains("seed")) {
                    synth.seed = doc["seed"].get<std::uint64_t>();
                }
            }
            if (common.seed) {
                synth.seed = *common.seed;
            }
            const Scene scene = synth_scene(synth);
            save_scene(scene, common.out);
            save_ply(*scene.ground_truth, (fs::path(common.out) / "gt.ply").string());
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
