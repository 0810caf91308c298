#include "sinpaint/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sinpaint::eval {

namespace {

double value_range(const Array2D& truth) {
    const auto [lo, hi] = std::minmax_element(truth.values.begin(), truth.values.end());
    const double r = double(*hi) - double(*lo);
    if (!(r > 0.0)) throw ConfigError("ground truth has zero data range");
    return r;
}

// Valid-mode separable Gaussian filter.
std::vector<double> filter(const std::vector<double>& img, std::size_t rows, std::size_t cols,
                           const std::vector<double>& w) {
    const std::size_t k = w.size(), orow = rows - k + 1, ocol = cols - k + 1;
    std::vector<double> tmp(rows * ocol), out(orow * ocol);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ocol; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += w[i] * img[r * cols + c + i];
            tmp[r * ocol + c] = s;
        }
    for (std::size_t r = 0; r < orow; ++r)
        for (std::size_t c = 0; c < ocol; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += w[i] * tmp[(r + i) * ocol + c];
            out[r * ocol + c] = s;
        }
    return out;
}

}  // namespace

double psnr(const Array2D& pred, const Array2D& truth) {
    require_same_shape(pred, truth, "psnr");
    const double range = value_range(truth);
    double se = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pred.values[i]) - double(truth.values[i]);
        se += d * d;
    }
    const double mse = se / double(pred.size());
    if (mse < 1e-12) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(range * range / mse));
}

double ssim(const Array2D& pred, const Array2D& truth, const SsimOptions& opts) {
    require_same_shape(pred, truth, "ssim");
    return ssim_with_range(pred, truth, value_range(truth), opts);
}

double ssim_with_range(const Array2D& a, const Array2D& b, double range, const SsimOptions& opts) {
    require_same_shape(a, b, "ssim");
    const std::size_t k = opts.window;
    if (k == 0 || k % 2 == 0) throw ConfigError("ssim window must be odd");
    if (a.rows < k || a.cols < k) {
        throw ShapeError("ssim: image " + a.shape_str() + " is smaller than the " + std::to_string(k) + "-pixel window");
    }
    std::vector<double> w(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double x = double(i) - double(k / 2);
        w[i] = std::exp(-x * x / (2.0 * opts.sigma * opts.sigma));
        total += w[i];
    }
    for (auto& v : w) v /= total;

    const std::size_t n = a.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = a.values[i];
        y[i] = b.values[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x, a.rows, a.cols, w), my = filter(y, a.rows, a.cols, w);
    const auto sxx = filter(xx, a.rows, a.cols, w), syy = filter(yy, a.rows, a.cols, w),
               sxy = filter(xy, a.rows, a.cols, w);
    const double c1 = std::pow(opts.k1 * range, 2), c2 = std::pow(opts.k2 * range, 2);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return acc / double(mx.size());
}

double missing_row_l1(const Array2D& pred, const Array2D& truth, const ops::AngularMask& mask) {
    require_same_shape(pred, truth, "missing_row_l1");
    if (pred.rows != mask.n_angles) throw ShapeError("missing_row_l1: mask does not match the sinogram");
    if (mask.count == 0) return 0.0;
    double s = 0.0;
    for (std::size_t a = mask.start; a < mask.start + mask.count; ++a)
        for (std::size_t k = 0; k < pred.cols; ++k) s += std::abs(double(pred(a, k)) - double(truth(a, k)));
    return s / double(mask.count * pred.cols);
}

}  // namespace sinpaint::eval
