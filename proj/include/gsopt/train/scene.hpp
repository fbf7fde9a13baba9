#pragma once

#include <gsopt/core/types.hpp>
#include <gsopt/render/renderer.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace gsopt {

/// Cameras with ground-truth images and a disjoint train/test partition.
struct Scene {
    std::vector<Camera> cameras;
    /// Indices into `cameras`.
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::optional<GaussianCloud> initial;
    /// Known only for synthetic scenes.
    std::optional<GaussianCloud> ground_truth;
    /// Ground-truth images carry 8-bit quantization (loaded from PNG).
    bool images_quantized = false;

    std::vector<Camera> train_cameras() const;
    std::vector<Camera> test_cameras() const;

    /// Throws ConfigError on empty or overlapping splits, out-of-range indices or missing images.
    void validate() const;
};

struct SynthSettings {
    std::size_t gaussians = 200;
    std::size_t cameras = 24;
    int image_size = 96;
    std::uint64_t seed = 0;
    int sh_degree = 1;
    /// Gaussians of the synthetic initialization; 0 means a tenth of `gaussians`.
    std::size_t initial = 0;
    double ring_radius = 2.0;
    double fov_degrees = 50.0;
};

/// Random Gaussians in the box [-0.5, 0.5]^3 seen by a ring of inward-looking cameras. Ground-truth
/// images are renders of the cloud itself; every fifth-ish camera is held out for testing.
Scene synth_scene(const SynthSettings &settings);

/// Sparse point-cloud style initialization: `count` ground-truth centers jittered, isotropic sizes
/// from neighbour spacing, low opacity, base color only.
GaussianCloud synthetic_init(const GaussianCloud &ground_truth, std::size_t count, std::uint64_t seed);

/// Radius of the sphere around the mean camera center that holds every camera, times 1.1.
double scene_extent(const std::vector<Camera> &cameras);

} // namespace gsopt
