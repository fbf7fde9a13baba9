#include "test_support.hpp"

#include <gsopt/core/errors.hpp>
#include <gsopt/train/exposure.hpp>
#include <gsopt/train/loss.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace gsopt;
using gsopt::testkit::dot;
using gsopt::testkit::random_image;

namespace {

Image uniform_image(std::mt19937_64 &rng, int w, int h, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (double &v : img.data()) {
        v = u(rng);
    }
    return img;
}

/// Direct per-pixel SSIM: windowed sums over the 11x11 kernel with pixels outside the image read as 0.
double naive_ssim(const Image &a, const Image &b) {
    double kernel[11];
    double ksum = 0.0;
    for (int i = 0; i < 11; ++i) {
        kernel[i] = std::exp(-0.5 * (i - 5) * (i - 5) / (1.5 * 1.5));
        ksum += kernel[i];
    }
    for (double &k : kernel) {
        k /= ksum;
    }
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (int dy = -5; dy <= 5; ++dy) {
                    for (int dx = -5; dx <= 5; ++dx) {
                        const int px = x + dx, py = y + dy;
                        if (px < 0 || py < 0 || px >= a.width() || py >= a.height()) {
                            continue;
                        }
                        const double w = kernel[dx + 5] * kernel[dy + 5];
                        const double va = a.at(px, py, c), vb = b.at(px, py, c);
                        mx += w * va;
                        my += w * vb;
                        xx += w * va * va;
                        yy += w * vb * vb;
                        xy += w * va * vb;
                    }
                }
                const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
                total += (2 * mx * my + kSsimC1) * (2 * cxy + kSsimC2) /
                         ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
            }
        }
    }
    return total / static_cast<double>(a.data().size());
}

} // namespace

TEST(Loss, IdenticalImagesGiveZero) {
    std::mt19937_64 rng(1);
    const Image a = uniform_image(rng, 13, 9, 0.0, 1.0);
    const LossResult r = compute_loss(a, a, 0.2);
    EXPECT_NEAR(r.loss, 0.0, 1e-14);
    for (const double g : r.grad.data()) {
        EXPECT_NEAR(g, 0.0, 1e-14);
    }
}

TEST(Loss, PureL1OnConstantOffset) {
    const Image a(8, 8, 3, 0.3), b(8, 8, 3, 0.4);
    EXPECT_NEAR(compute_loss(a, b, 0.0).loss, 0.1, 1e-15);
}

TEST(Loss, IdenticalConstantImagesHaveUnitSsim) {
    const Image a(8, 8, 3, 0.6);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-15);
    EXPECT_NEAR(compute_loss(a, a, 1.0).loss, 0.0, 1e-15);
}

TEST(Loss, SsimMatchesDirectWindowedSums) {
    std::mt19937_64 rng(2);
    const Image a = uniform_image(rng, 17, 12, 0.0, 1.0);
    const Image b = uniform_image(rng, 17, 12, 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), naive_ssim(a, b), 1e-12);
}

TEST(Loss, SsimGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    Image a = uniform_image(rng, 14, 11, 0.0, 1.0);
    const Image b = uniform_image(rng, 14, 11, 0.0, 1.0);
    Image grad;
    ssim_with_gradient(a, b, grad);
    double max_err = 0.0, max_num = 0.0;
    const double h = 1e-6;
    for (std::size_t k = 0; k < a.data().size(); k += 7) {
        const double keep = a.data()[k];
        a.data()[k] = keep + h;
        const double up = ssim(a, b);
        a.data()[k] = keep - h;
        const double down = ssim(a, b);
        a.data()[k] = keep;
        const double num = (up - down) / (2 * h);
        max_err = std::max(max_err, std::abs(num - grad.data()[k]));
        max_num = std::max(max_num, std::abs(num));
    }
    EXPECT_LT(max_err / max_num, 1e-6);
}

TEST(Loss, FullGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    Image a = uniform_image(rng, 12, 12, 0.0, 0.45);
    const Image b = uniform_image(rng, 12, 12, 0.55, 1.0);  // keeps L1 away from its kink
    const LossResult r = compute_loss(a, b, 0.2);
    const double h = 1e-6;
    for (std::size_t k = 0; k < a.data().size(); k += 5) {
        const double keep = a.data()[k];
        a.data()[k] = keep + h;
        const double up = compute_loss(a, b, 0.2).loss;
        a.data()[k] = keep - h;
        const double down = compute_loss(a, b, 0.2).loss;
        a.data()[k] = keep;
        EXPECT_NEAR(r.grad.data()[k], (up - down) / (2 * h), 1e-7);
    }
}

TEST(Loss, RejectsBadInput) {
    EXPECT_THROW(compute_loss(Image(4, 4), Image(4, 5), 0.2), InvalidParameter);
    EXPECT_THROW(compute_loss(Image(4, 4), Image(4, 4), 1.5), InvalidParameter);
}

TEST(Metrics, PsnrExamples) {
    EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-12);
    const Image black(5, 5, 3, 0.0), white(5, 5, 3, 1.0);
    EXPECT_NEAR(psnr(black, white), 0.0, 1e-12);
    EXPECT_EQ(psnr(white, white), kPsnrCap);
    EXPECT_NEAR(ssim(white, white), 1.0, 1e-15);
}

TEST(Exposure, IdentityAndHalfGain) {
    std::mt19937_64 rng(5);
    const Image img = uniform_image(rng, 6, 4, 0.0, 1.0);
    EXPECT_EQ(apply_exposure(img, ExposureParams(1), 0), img);
    Mat34 half = Mat34::Zero();
    half.leftCols<3>() = 0.5 * Eigen::Matrix3d::Identity();
    const Image out = apply_exposure(Image(3, 3, 3, 1.0), half);
    for (const double v : out.data()) {
        EXPECT_EQ(v, 0.5);
    }
}

TEST(Exposure, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(6);
    const Image img = uniform_image(rng, 7, 5, 0.2, 0.8);
    const Image weights = random_image(rng, 7, 5);
    Mat34 t;
    t << 0.9, 0.05, 0.0, 0.02, 0.03, 1.1, -0.04, -0.01, 0.0, 0.02, 0.95, 0.03;
    Mat34 grad = Mat34::Zero();
    const Image grad_img = exposure_backward(img, t, weights, grad);
    const double h = 1e-6;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            Mat34 up = t, down = t;
            up(r, c) += h;
            down(r, c) -= h;
            const double num =
                (dot(weights, apply_exposure(img, up)) - dot(weights, apply_exposure(img, down))) / (2 * h);
            EXPECT_LT(std::abs(grad(r, c) - num), 1e-6 * std::max(1.0, std::abs(num))) << r << "," << c;
        }
    }
    Image probe = img;
    probe.data()[4] += h;
    const double up = dot(weights, apply_exposure(probe, t));
    probe.data()[4] -= 2 * h;
    const double down = dot(weights, apply_exposure(probe, t));
    EXPECT_NEAR(grad_img.data()[4], (up - down) / (2 * h), 1e-8);
}

TEST(Exposure, ClampedOutputsPassNoGradient) {
    const Image white(2, 2, 3, 1.0);
    Mat34 t = Mat34::Zero();
    t.leftCols<3>() = 2.0 * Eigen::Matrix3d::Identity();
    Mat34 grad = Mat34::Zero();
    const Image g = exposure_backward(white, t, Image(2, 2, 3, 1.0), grad);
    EXPECT_EQ(grad, Mat34::Zero());
    for (const double v : g.data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Exposure, FitRecoversAffineMap) {
    std::mt19937_64 rng(7);
    const Image img = uniform_image(rng, 16, 16, 0.1, 0.7);
    Mat34 t;
    t << 1.1, 0.02, 0.0, 0.05, 0.0, 0.9, 0.03, 0.02, -0.02, 0.0, 1.05, 0.01;
    const Mat34 fit = fit_exposure(img, apply_exposure(img, t));
    EXPECT_LT((fit - t).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Exposure, OptimizerStepsOnlyTheGivenImage) {
    ExposureParams p(2);
    ExposureOptimizer opt(2, 1e-3);
    Mat34 g = Mat34::Zero();
    g(0, 3) = 5.0;
    opt.step(p, 1, g);
    EXPECT_NEAR(p.transforms[1](0, 3), -1e-3, 1e-12);
    EXPECT_EQ(p.transforms[0], ExposureParams(1).transforms[0]);
}
