#pragma once

#include <gsopt/core/types.hpp>

#include <array>
#include <span>

namespace gsopt {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShBasis = sh_basis_count(kMaxShDegree);
inline constexpr double kShC0 = 0.28209479177387814;

/// Real SH basis values at unit direction `dir`, in the usual graphics ordering.
std::array<double, kMaxShBasis> sh_basis_values(const Vec3 &dir, int degree);

/// Basis values plus their derivatives with respect to the three direction components.
void sh_basis_with_gradient(const Vec3 &dir, int degree, std::array<double, kMaxShBasis> &values,
                            std::array<Vec3, kMaxShBasis> &gradients);

struct ShColor {
    Vec3 rgb = Vec3::Zero();
    /// Channels whose unclamped value fell outside [0, 1].
    std::array<bool, 3> clamped{false, false, false};
};

/// View-dependent color: sum_k Y_k(dir) c_k + 0.5, clamped to [0, 1]. `view_direction` need not be
/// unit; the zero vector is rejected.
ShColor eval_sh(std::span<const double> coeffs, const Vec3 &view_direction, int degree);

/// Backpropagates dL/drgb through eval_sh. Accumulates into `grad_coeffs` and returns dL/d(view_direction)
/// for the unnormalized direction.
Vec3 eval_sh_backward(std::span<const double> coeffs, const Vec3 &view_direction, int degree,
                      const ShColor &color, const Vec3 &grad_rgb, std::span<double> grad_coeffs);

} // namespace gsopt
