#pragma once

#include <gsopt/core/types.hpp>

namespace gsopt {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kPsnrCap = 100.0;

/// Mean SSIM over pixels and channels, 11x11 Gaussian window (sigma 1.5) with zero padding.
double ssim(const Image &a, const Image &b);

/// Mean SSIM and its gradient with respect to `a`.
double ssim_with_gradient(const Image &a, const Image &b, Image &grad_a);

double mean_squared_error(const Image &a, const Image &b);

/// -10 log10(MSE), capped at 100 dB (identical images).
double psnr(const Image &a, const Image &b);
double psnr_from_mse(double mse);

struct LossResult {
    double loss = 0.0;
    double l1 = 0.0;
    double ssim = 1.0;
    Image grad;
};

/// (1 - lambda) L1 + lambda (1 - SSIM) and its gradient with respect to `rendered`.
LossResult compute_loss(const Image &rendered, const Image &gt, double lambda);

} // namespace gsopt
