#include "sinpaint/tomo/projector.hpp"

#include <cmath>
#include <string>

namespace sinpaint::tomo {

void Geometry::validate() const {
    if (n_detectors < 2 || n_angles < 1) {
        throw ConfigError("geometry needs at least 2 detectors and 1 angle (got " +
                          std::to_string(n_detectors) + ", " + std::to_string(n_angles) + ")");
    }
    if (!(angle_span > 0.0) || !(pixel_pitch > 0.0) || !(detector_pitch > 0.0)) {
        throw ConfigError("geometry spans and pitches must be positive");
    }
}

Projector::Projector(Geometry geom) : geom_(geom) {
    geom_.validate();
    cos_.resize(geom_.n_angles);
    sin_.resize(geom_.n_angles);
    for (std::size_t a = 0; a < geom_.n_angles; ++a) {
        cos_[a] = std::cos(geom_.angle(a));
        sin_[a] = std::sin(geom_.angle(a));
    }
}

// One pass over all rays. Forward: dst[ray] = sum_w w * src[pixel].
// Transpose: dst[pixel] += w * src[ray].
template <typename In, typename Out, bool Transpose>
void Projector::trace(const In* src, Out* dst) const {
    const std::size_t n = side();
    const std::size_t nd = geom_.n_detectors;
    const double c = (double(n) - 1.0) / 2.0;
    const double dc = (double(nd) - 1.0) / 2.0;
    const double s_scale = geom_.detector_pitch / geom_.pixel_pitch;
    const long last = long(n) - 1;

    for (std::size_t a = 0; a < geom_.n_angles; ++a) {
        const double ct = cos_[a], st = sin_[a];
        // March along the axis most perpendicular to the ray.
        const bool by_column = std::abs(st) >= std::abs(ct);
        const double lead = by_column ? st : ct;
        const double other = by_column ? ct : st;
        const double w = geom_.pixel_pitch / std::abs(lead);
        const double slope = -other / lead;  // d(cross index) / d(marching index)
        for (std::size_t k = 0; k < nd; ++k) {
            const double s = (double(k) - dc) * s_scale;
            // cross coordinate (index units) at marching index 0
            const double f0 = s / lead + c - slope * c;
            const std::size_t ray = a * nd + k;
            double acc = 0.0;
            const double g = Transpose ? w * double(src[ray]) : 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                const double f = f0 + slope * double(m);
                const double fl = std::floor(f);
                const long i0 = long(fl);
                if (i0 < -1 || i0 > last) continue;
                const double t = f - fl;
                // by_column: marching index is the column j, cross index the row i.
                const std::size_t p0 = by_column ? std::size_t(i0) * n + m : m * n + std::size_t(i0);
                const std::size_t step = by_column ? n : 1;
                if constexpr (Transpose) {
                    if (i0 >= 0) dst[p0] += Out(g * (1.0 - t));
                    if (i0 < last) dst[p0 + step] += Out(g * t);
                } else {
                    if (i0 >= 0) acc += (1.0 - t) * double(src[p0]);
                    if (i0 < last) acc += t * double(src[p0 + step]);
                }
            }
            if constexpr (!Transpose) dst[ray] = Out(w * acc);
        }
    }
}

Array2D Projector::forward(const Array2D& image) const {
    if (image.rows != image.cols) {
        throw ShapeError("radon: image must be square, got " + image.shape_str());
    }
    if (image.rows != side()) {
        throw ShapeError("radon: image side " + std::to_string(image.rows) +
                         " does not match " + std::to_string(side()) + " detectors");
    }
    Array2D sino(geom_.n_angles, geom_.n_detectors);
    trace<float, float, false>(image.values.data(), sino.values.data());
    return sino;
}

Array2D Projector::backproject(const Array2D& sino) const {
    if (sino.rows != geom_.n_angles || sino.cols != geom_.n_detectors) {
        throw ShapeError("backproject: sinogram " + sino.shape_str() + " does not match geometry " +
                         std::to_string(geom_.n_angles) + "x" + std::to_string(geom_.n_detectors));
    }
    std::vector<double> acc(side() * side(), 0.0);
    trace<float, double, true>(sino.values.data(), acc.data());
    Array2D out(side(), side());
    for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = float(acc[i]);
    return out;
}

void Projector::forward(const std::vector<double>& image, std::vector<double>& sino) const {
    sino.assign(geom_.n_angles * geom_.n_detectors, 0.0);
    trace<double, double, false>(image.data(), sino.data());
}

void Projector::backproject(const std::vector<double>& sino, std::vector<double>& image) const {
    image.assign(side() * side(), 0.0);
    trace<double, double, true>(sino.data(), image.data());
}

Array2D radon(const Array2D& image, const Geometry& geom) { return Projector(geom).forward(image); }

Array2D sirt(const Array2D& sino, const Geometry& geom, const SirtOptions& opts,
             const std::vector<bool>& observed, std::vector<double>* residuals) {
    if (opts.iterations < 1) throw ConfigError("sirt: iterations must be >= 1");
    const Projector proj(geom);
    const std::size_t na = geom.n_angles, nd = geom.n_detectors, n = proj.side();
    if (sino.rows != na || sino.cols != nd) {
        throw ShapeError("sirt: sinogram " + sino.shape_str() + " does not match geometry");
    }
    if (!observed.empty() && observed.size() != na) {
        throw ShapeError("sirt: observed-row flags have length " + std::to_string(observed.size()) +
                         ", expected " + std::to_string(na));
    }
    auto used = [&](std::size_t a) { return observed.empty() || observed[a]; };

    std::vector<double> ones(n * n, 1.0), row_sum, ray_weight(na * nd, 0.0), col_sum;
    proj.forward(ones, row_sum);
    for (std::size_t a = 0; a < na; ++a) {
        if (!used(a)) continue;
        for (std::size_t k = 0; k < nd; ++k) {
            const double r = row_sum[a * nd + k];
            ray_weight[a * nd + k] = r > opts.eps ? 1.0 / r : 0.0;
        }
    }
    std::vector<double> used_rows(na * nd, 0.0);
    for (std::size_t a = 0; a < na; ++a)
        if (used(a)) std::fill_n(used_rows.begin() + a * nd, nd, 1.0);
    proj.backproject(used_rows, col_sum);
    std::vector<double> pix_weight(n * n);
    for (std::size_t j = 0; j < n * n; ++j) {
        pix_weight[j] = col_sum[j] > opts.eps ? opts.relaxation / col_sum[j] : 0.0;
    }

    std::vector<double> x(n * n, 0.0), ax, resid(na * nd), update;
    for (std::size_t it = 0; it < opts.iterations; ++it) {
        proj.forward(x, ax);
        for (std::size_t r = 0; r < na * nd; ++r) {
            resid[r] = (double(sino.values[r]) - ax[r]) * ray_weight[r];
        }
        proj.backproject(resid, update);
        for (std::size_t j = 0; j < n * n; ++j) {
            x[j] += pix_weight[j] * update[j];
            if (opts.nonnegative && x[j] < 0.0) x[j] = 0.0;
        }
        if (residuals) {
            proj.forward(x, ax);
            double ss = 0.0;
            for (std::size_t r = 0; r < na * nd; ++r) {
                if (!used_rows[r]) continue;
                const double d = ax[r] - double(sino.values[r]);
                ss += d * d;
            }
            residuals->push_back(std::sqrt(ss));
        }
    }
    Array2D out(n, n);
    for (std::size_t j = 0; j < n * n; ++j) out.values[j] = float(x[j]);
    return out;
}

}  // namespace sinpaint::tomo
