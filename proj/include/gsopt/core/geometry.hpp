#pragma once

#include <gsopt/core/types.hpp>

#include <optional>
#include <vector>

namespace gsopt {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kDefaultLowpass = 0.09;
inline constexpr double kFrustumGuardBand = 1.3;

/// Rotation matrix of the quaternion (w, x, y, z). The quaternion is normalized first.
Mat3 quaternion_to_rotation(const Vec4 &q);

/// R diag(s^2) R^T for linear sizes `sizes` and rotation `rotation`.
Mat3 build_covariance(const Vec3 &sizes, const Vec4 &rotation);

/// Jacobian of the pinhole projection at camera-frame point `p_cam`.
Mat23 projection_jacobian(const Camera &camera, const Vec3 &p_cam);

/// True when the camera-frame point lies past the near plane and its projection falls inside the
/// image bounds enlarged by the guard band.
bool in_frustum(const Camera &camera, const Vec3 &p_cam, double near = kNearPlane,
                double guard_band = kFrustumGuardBand);

/// EWA projection of a 3D Gaussian. Returns nullopt when the center is culled.
std::optional<Gaussian2D> project_to_2d(const Vec3 &position, const Mat3 &cov3d, const Camera &camera,
                                        double lowpass = kDefaultLowpass);

/// Indices of in-frustum Gaussians sorted by camera-frame depth, ties by index.
std::vector<std::size_t> sort_by_depth(const GaussianCloud &cloud, const Camera &camera);

// Vector-Jacobian products used by the renderer backward pass.

/// dL/dq for the (unnormalized) quaternion `q` given dL/dR of quaternion_to_rotation(q).
Vec4 quaternion_to_rotation_vjp(const Vec4 &q, const Mat3 &grad_rotation);

/// Backpropagates dL/dSigma (full symmetric gradient) through build_covariance.
void build_covariance_vjp(const Vec3 &sizes, const Vec4 &rotation, const Mat3 &grad_cov, Vec3 &grad_sizes,
                          Vec4 &grad_rotation);

} // namespace gsopt
