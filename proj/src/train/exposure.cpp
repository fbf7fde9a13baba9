#include <gsopt/core/errors.hpp>
#include <gsopt/train/exposure.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace gsopt {

namespace {

Mat34 identity_transform() {
    Mat34 t = Mat34::Zero();
    t.leftCols<3>().setIdentity();
    return t;
}

void check_rgb(const Image &img, const char *what) {
    if (img.channels() != 3) {
        throw InvalidParameter(std::string(what) + ": expected a 3-channel image");
    }
}

} // namespace

void ExposureParams::reset(std::size_t images) { transforms.assign(images, identity_transform()); }

Image apply_exposure(const Image &rendered, const Mat34 &transform) {
    check_rgb(rendered, "apply_exposure");
    Image out(rendered.width(), rendered.height(), 3);
    const auto in = rendered.data();
    auto o = out.data();
    for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
        const Vec3 rgb(in[3 * p], in[3 * p + 1], in[3 * p + 2]);
        const Vec3 v = transform.leftCols<3>() * rgb + transform.col(3);
        for (int c = 0; c < 3; ++c) {
            o[3 * p + c] = std::clamp(v[c], 0.0, 1.0);
        }
    }
    return out;
}

Image apply_exposure(const Image &rendered, const ExposureParams &params, std::size_t image_index) {
    if (image_index >= params.size()) {
        throw InvalidParameter("apply_exposure: image index out of range");
    }
    return apply_exposure(rendered, params.transforms[image_index]);
}

Image exposure_backward(const Image &rendered, const Mat34 &transform, const Image &grad_out,
                        Mat34 &grad_transform) {
    check_rgb(rendered, "exposure_backward");
    if (!rendered.same_shape(grad_out)) {
        throw InvalidParameter("exposure_backward: gradient shape mismatch");
    }
    Image grad_in(rendered.width(), rendered.height(), 3);
    const auto in = rendered.data();
    const auto go = grad_out.data();
    auto gi = grad_in.data();
    const Mat3 m = transform.leftCols<3>();
    for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
        const Vec3 rgb(in[3 * p], in[3 * p + 1], in[3 * p + 2]);
        const Vec3 v = m * rgb + transform.col(3);
        Vec3 g;
        for (int c = 0; c < 3; ++c) {
            g[c] = (v[c] < 0.0 || v[c] > 1.0) ? 0.0 : go[3 * p + c];
        }
        grad_transform.leftCols<3>() += g * rgb.transpose();
        grad_transform.col(3) += g;
        const Vec3 back = m.transpose() * g;
        for (int c = 0; c < 3; ++c) {
            gi[3 * p + c] = back[c];
        }
    }
    return grad_in;
}

ExposureOptimizer::ExposureOptimizer(std::size_t images, double learning_rate)
    : lr_(learning_rate), m_(images, Mat34::Zero()), v_(images, Mat34::Zero()), t_(images, 0) {}

void ExposureOptimizer::step(ExposureParams &params, std::size_t image_index, const Mat34 &grad) {
    if (image_index >= params.size() || image_index >= m_.size()) {
        throw InvalidParameter("ExposureOptimizer::step: image index out of range");
    }
    if (!grad.allFinite()) {
        return;
    }
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-15;
    const long t = ++t_[image_index];
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    Mat34 &m = m_[image_index];
    Mat34 &v = v_[image_index];
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const Mat34 update = (m / bc1).array() / ((v / bc2).array().sqrt() + kEps);
    params.transforms[image_index] -= lr_ * update;
}

Mat34 fit_exposure(const Image &rendered, const Image &target) {
    check_rgb(rendered, "fit_exposure");
    if (!rendered.same_shape(target)) {
        throw InvalidParameter("fit_exposure: shape mismatch");
    }
    // Normal equations of [rgb 1] -> target, with a tiny ridge toward the identity transform.
    Mat4 ata = Mat4::Zero();
    Eigen::Matrix<double, 4, 3> atb = Eigen::Matrix<double, 4, 3>::Zero();
    const auto in = rendered.data();
    const auto tg = target.data();
    for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
        const Vec4 a(in[3 * p], in[3 * p + 1], in[3 * p + 2], 1.0);
        const Vec3 b(tg[3 * p], tg[3 * p + 1], tg[3 * p + 2]);
        ata += a * a.transpose();
        atb += a * b.transpose();
    }
    constexpr double kRidge = 1e-6;
    const Mat34 prior = identity_transform();
    ata += kRidge * Mat4::Identity();
    atb += kRidge * prior.transpose();
    const Eigen::Matrix<double, 4, 3> x = ata.ldlt().solve(atb);
    return x.transpose();
}

} // namespace gsopt
