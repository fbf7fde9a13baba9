#include <gsopt/core/errors.hpp>
#include <gsopt/train/loss.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace gsopt {

namespace {

constexpr int kRadius = kSsimWindow / 2;

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kRadius;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double &v : w) {
        v /= sum;
    }
    return w;
}

/// Single-channel plane, row-major.
using Plane = std::vector<double>;

/// Separable zero-padded correlation with the (symmetric) SSIM window, same-size output.
Plane blur(const Plane &in, int width, int height) {
    static const auto w = gaussian_window();
    Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        const double *row = in.data() + static_cast<std::size_t>(y) * width;
        double *dst = tmp.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            const int k0 = std::max(-kRadius, -x);
            const int k1 = std::min(kRadius, width - 1 - x);
            double s = 0.0;
            for (int k = k0; k <= k1; ++k) {
                s += w[k + kRadius] * row[x + k];
            }
            dst[x] = s;
        }
    }
    for (int y = 0; y < height; ++y) {
        const int k0 = std::max(-kRadius, -y);
        const int k1 = std::min(kRadius, height - 1 - y);
        double *dst = out.data() + static_cast<std::size_t>(y) * width;
        for (int k = k0; k <= k1; ++k) {
            const double wk = w[k + kRadius];
            const double *src = tmp.data() + static_cast<std::size_t>(y + k) * width;
            for (int x = 0; x < width; ++x) {
                dst[x] += wk * src[x];
            }
        }
    }
    return out;
}

Plane channel(const Image &img, int c) {
    Plane p(img.pixel_count());
    const auto d = img.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = d[i * img.channels() + c];
    }
    return p;
}

void check_shapes(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b) || a.empty()) {
        throw InvalidParameter(std::string(what) + ": images must be non-empty and of the same shape");
    }
}

double ssim_impl(const Image &a, const Image &b, Image *grad_a) {
    const int w = a.width(), h = a.height();
    const std::size_t np = a.pixel_count();
    const double inv_n = 1.0 / static_cast<double>(np * a.channels());
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        const Plane x = channel(a, c), y = channel(b, c);
        Plane xx(np), yy(np), xy(np);
        for (std::size_t i = 0; i < np; ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const Plane mx = blur(x, w, h), my = blur(y, w, h);
        const Plane exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
        Plane da, db, dc;
        if (grad_a) {
            da.resize(np);
            db.resize(np);
            dc.resize(np);
        }
        for (std::size_t i = 0; i < np; ++i) {
            const double vx = exx[i] - mx[i] * mx[i];
            const double vy = eyy[i] - my[i] * my[i];
            const double cxy = exy[i] - mx[i] * my[i];
            const double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
            const double a2 = 2.0 * cxy + kSsimC2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
            const double b2 = vx + vy + kSsimC2;
            const double s = a1 * a2 / (b1 * b2);
            total += s;
            if (grad_a) {
                // Partials of S with respect to mu_x, E[x^2] and E[xy], written with explicit
                // differences so they vanish exactly when the images agree.
                const double dm = my[i] - mx[i];
                const double spread = (exx[i] - 2.0 * exy[i] + eyy[i]) - dm * dm;  // b2 - a2
                const double d_mu = 2.0 * a2 / (b1 * b1 * b2) * dm * (my[i] * (mx[i] + my[i]) + kSsimC1);
                const double d_cov = 2.0 * a1 / (b1 * b2);
                // 2 d_var + d_cov
                const double e = 2.0 * a1 * spread / (b1 * b2 * b2);
                db[i] = e * inv_n;
                dc[i] = d_cov * inv_n;
                da[i] = (d_mu - mx[i] * e - dm * d_cov) * inv_n;
            }
        }
        if (grad_a) {
            const Plane ga = blur(da, w, h), gb = blur(db, w, h), gc = blur(dc, w, h);
            auto out = grad_a->data();
            for (std::size_t i = 0; i < np; ++i) {
                out[i * a.channels() + c] = ga[i] + x[i] * gb[i] + (y[i] - x[i]) * gc[i];
            }
        }
    }
    return total * inv_n;
}

} // namespace

double ssim(const Image &a, const Image &b) {
    check_shapes(a, b, "ssim");
    return ssim_impl(a, b, nullptr);
}

double ssim_with_gradient(const Image &a, const Image &b, Image &grad_a) {
    check_shapes(a, b, "ssim");
    grad_a = Image(a.width(), a.height(), a.channels());
    return ssim_impl(a, b, &grad_a);
}

double mean_squared_error(const Image &a, const Image &b) {
    check_shapes(a, b, "mean_squared_error");
    const auto da = a.data(), db = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        s += d * d;
    }
    return s / static_cast<double>(da.size());
}

double psnr_from_mse(double mse) {
    if (!(mse > 0.0)) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double psnr(const Image &a, const Image &b) { return psnr_from_mse(mean_squared_error(a, b)); }

LossResult compute_loss(const Image &rendered, const Image &gt, double lambda) {
    check_shapes(rendered, gt, "compute_loss");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw InvalidParameter("compute_loss: lambda must lie in [0, 1]");
    }
    LossResult r;
    const auto x = rendered.data(), y = gt.data();
    const double inv_n = 1.0 / static_cast<double>(x.size());
    r.grad = Image(rendered.width(), rendered.height(), rendered.channels());
    auto g = r.grad.data();
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        l1 += std::abs(d);
        g[i] = (1.0 - lambda) * inv_n * static_cast<double>((d > 0.0) - (d < 0.0));
    }
    r.l1 = l1 * inv_n;
    if (lambda > 0.0) {
        Image gs;
        r.ssim = ssim_with_gradient(rendered, gt, gs);
        const auto gsd = gs.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] -= lambda * gsd[i];
        }
    } else {
        r.ssim = ssim(rendered, gt);
    }
    r.loss = (1.0 - lambda) * r.l1 + lambda * (1.0 - r.ssim);
    return r;
}

} // namespace gsopt
