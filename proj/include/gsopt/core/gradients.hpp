#pragma once

#include <gsopt/core/types.hpp>

#include <cstdint>
#include <vector>

namespace gsopt {

/// Per-parameter loss gradients laid out like GaussianCloud, plus the sparse-update mask.
struct CloudGradients {
    std::vector<Vec3> positions;
    std::vector<Vec3> sizes;
    std::vector<Vec4> rotations;
    std::vector<double> opacity_logits;
    std::vector<double> sh;
    /// 1 where the Gaussian was evaluated at one or more pixels of the backward pass.
    std::vector<std::uint8_t> touched;
    /// Norm of dL/d(projected mean) in pixels; feeds the gradient-driven baseline densifier.
    std::vector<double> mean2d_grad_norm;

    CloudGradients() = default;
    CloudGradients(std::size_t count, int sh_stride) { reset(count, sh_stride); }

    std::size_t size() const { return positions.size(); }

    void reset(std::size_t count, int sh_stride) {
        positions.assign(count, Vec3::Zero());
        sizes.assign(count, Vec3::Zero());
        rotations.assign(count, Vec4::Zero());
        opacity_logits.assign(count, 0.0);
        sh.assign(count * static_cast<std::size_t>(sh_stride), 0.0);
        touched.assign(count, 0);
        mean2d_grad_norm.assign(count, 0.0);
    }
};

} // namespace gsopt
