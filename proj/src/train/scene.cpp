#include <gsopt/core/errors.hpp>
#include <gsopt/core/sh.hpp>
#include <gsopt/train/scene.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace gsopt {

std::vector<Camera> Scene::train_cameras() const {
    std::vector<Camera> out;
    for (const std::size_t i : train) {
        out.push_back(cameras.at(i));
    }
    return out;
}

std::vector<Camera> Scene::test_cameras() const {
    std::vector<Camera> out;
    for (const std::size_t i : test) {
        out.push_back(cameras.at(i));
    }
    return out;
}

void Scene::validate() const {
    if (train.empty()) {
        throw ConfigError("scene has no training cameras");
    }
    std::vector<std::uint8_t> role(cameras.size(), 0);
    for (const auto *list : {&train, &test}) {
        for (const std::size_t i : *list) {
            if (i >= cameras.size()) {
                throw ConfigError("scene split references camera " + std::to_string(i) + " which does not exist");
            }
            if (role[i]) {
                throw ConfigError("camera " + std::to_string(cameras[i].id) + " appears twice in the splits");
            }
            role[i] = 1;
        }
    }
    for (const Camera &c : cameras) {
        if (c.gt_image.width() != c.width || c.gt_image.height() != c.height || c.gt_image.channels() != 3) {
            throw ConfigError("camera " + std::to_string(c.id) + " has no matching RGB ground-truth image");
        }
    }
}

Scene synth_scene(const SynthSettings &s) {
    if (s.gaussians < 1 || s.cameras < 2 || s.image_size < 1) {
        throw InvalidParameter("synth_scene: need at least one Gaussian, two cameras and a positive image size");
    }
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    GaussianCloud gt(s.sh_degree, s.gaussians);
    const int basis = gt.sh_basis();
    for (std::size_t i = 0; i < s.gaussians; ++i) {
        gt.positions[i] = Vec3(unit(rng), unit(rng), unit(rng)) - Vec3::Constant(0.5);
        for (int k = 0; k < 3; ++k) {
            gt.sizes[i][k] = 0.02 + 0.08 * unit(rng);
        }
        gt.rotations[i] = Vec4(normal(rng), normal(rng), normal(rng), normal(rng)).normalized();
        gt.opacity_logits[i] = logit(0.3 + 0.65 * unit(rng));
        auto sh = gt.sh_of(i);
        for (int c = 0; c < 3; ++c) {
            sh[c] = (0.1 + 0.8 * unit(rng) - 0.5) / kShC0;
        }
        for (int b = 1; b < basis; ++b) {
            for (int c = 0; c < 3; ++c) {
                sh[3 * b + c] = 0.1 * (2.0 * unit(rng) - 1.0);
            }
        }
    }

    Scene scene;
    const double focal = 0.5 * s.image_size / std::tan(0.5 * s.fov_degrees * std::numbers::pi / 180.0);
    for (std::size_t c = 0; c < s.cameras; ++c) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(s.cameras);
        const double height = 0.5 * std::sin(3.0 * phi);
        const Vec3 eye(s.ring_radius * std::cos(phi), height, s.ring_radius * std::sin(phi));
        Camera cam = Camera::look_at(eye, Vec3::Zero(), Vec3(0.0, 1.0, 0.0), s.image_size, s.image_size, focal);
        cam.id = static_cast<int>(c);
        cam.gt_image = render_forward(gt, cam).output.image;
        scene.cameras.push_back(std::move(cam));
    }

    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * s.cameras)));
    std::vector<std::uint8_t> is_test(s.cameras, 0);
    for (std::size_t k = 0; k < n_test; ++k) {
        is_test[static_cast<std::size_t>((k + 0.5) * static_cast<double>(s.cameras) / static_cast<double>(n_test))] = 1;
    }
    for (std::size_t c = 0; c < s.cameras; ++c) {
        (is_test[c] ? scene.test : scene.train).push_back(c);
    }

    const std::size_t n_init = s.initial > 0 ? s.initial : std::max<std::size_t>(1, s.gaussians / 10);
    scene.initial = synthetic_init(gt, n_init, s.seed ^ 0x9e3779b97f4a7c15ULL);
    scene.ground_truth = std::move(gt);
    return scene;
}

GaussianCloud synthetic_init(const GaussianCloud &gt, std::size_t count, std::uint64_t seed) {
    if (count < 1 || count > gt.size()) {
        throw InvalidParameter("synthetic_init: count must lie in [1, ground-truth size]");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::size_t> order(gt.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    // Partial Fisher-Yates with an explicit draw so the result does not depend on the library's shuffle.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
    }

    constexpr double kJitter = 0.02;
    GaussianCloud init(gt.sh_degree, count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t src = order[k];
        init.positions[k] = gt.positions[src] + kJitter * Vec3(normal(rng), normal(rng), normal(rng));
        init.opacity_logits[k] = logit(0.1);
        auto sh = init.sh_of(k);
        const auto gsh = gt.sh_of(src);
        for (int c = 0; c < 3; ++c) {
            sh[c] = gsh[c];
        }
    }
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> d;
        for (std::size_t j = 0; j < count; ++j) {
            if (j != k) {
                d.push_back((init.positions[j] - init.positions[k]).norm());
            }
        }
        double size = 0.05;
        if (!d.empty()) {
            const std::size_t nn = std::min<std::size_t>(3, d.size());
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(nn), d.end());
            double sum = 0.0;
            for (std::size_t j = 0; j < nn; ++j) {
                sum += d[j];
            }
            size = std::clamp(sum / static_cast<double>(nn), 0.01, 0.3);
        }
        init.sizes[k] = Vec3::Constant(size);
    }
    return init;
}

double scene_extent(const std::vector<Camera> &cameras) {
    if (cameras.empty()) {
        return 1.0;
    }
    Vec3 mean = Vec3::Zero();
    for (const Camera &c : cameras) {
        mean += c.center();
    }
    mean /= static_cast<double>(cameras.size());
    double r = 0.0;
    for (const Camera &c : cameras) {
        r = std::max(r, (c.center() - mean).norm());
    }
    return 1.1 * std::max(r, 1e-6);
}

} // namespace gsopt
