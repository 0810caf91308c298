#include "sinpaint/ops/sinogram_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sinpaint::ops {

namespace {

void require_angles(const Array2D& s, const AngularMask& m, const char* what) {
    if (s.rows != m.n_angles) {
        throw ShapeError(std::string(what) + ": sinogram has " + std::to_string(s.rows) +
                         " angles, mask expects " + std::to_string(m.n_angles));
    }
}

double row_sum(const Array2D& s, std::size_t a) {
    double t = 0.0;
    for (float v : s.row(a)) t += v;
    return t;
}

}  // namespace

AngularMask::AngularMask(std::size_t n, std::size_t s, std::size_t c) : n_angles(n), start(s), count(c) {
    if (start + count > n_angles) {
        throw ConfigError("angular mask [" + std::to_string(start) + ", " + std::to_string(start + count) +
                          ") exceeds " + std::to_string(n_angles) + " angles");
    }
}

std::size_t AngularMask::missing_count(std::size_t n, double fraction) {
    if (!(fraction >= 0.05 - 1e-12 && fraction <= 0.95 + 1e-12)) {
        throw ConfigError("missing fraction " + std::to_string(fraction) + " outside [0.05, 0.95]");
    }
    return std::max<std::size_t>(1, std::size_t(std::floor(fraction * double(n) + 1e-9)));
}

AngularMask AngularMask::from_fraction(std::size_t n, double fraction, std::size_t start) {
    return AngularMask(n, start, missing_count(n, fraction));
}

AngularMask AngularMask::random(std::size_t n, double fraction, Rng& rng) {
    const std::size_t k = missing_count(n, fraction);
    std::uniform_int_distribution<std::size_t> start(0, n - k);
    return AngularMask(n, start(rng), k);
}

std::vector<bool> AngularMask::observed() const {
    std::vector<bool> v(n_angles, true);
    for (std::size_t a = start; a < start + count; ++a) v[a] = false;
    return v;
}

Array2D apply_mask(const Array2D& full, const AngularMask& mask) {
    require_angles(full, mask, "apply_mask");
    Array2D out = full;
    for (std::size_t a = mask.start; a < mask.start + mask.count; ++a) {
        std::fill(out.row(a).begin(), out.row(a).end(), 0.0f);
    }
    return out;
}

double prior_scale_factor(const Array2D& measured, const Array2D& prior, const AngularMask& mask) {
    require_same_shape(measured, prior, "scale_prior");
    require_angles(measured, mask, "scale_prior");
    if (mask.n_observed() == 0) throw ConfigError("scale_prior: no observed angles");
    double m = 0.0, p = 0.0;
    for (std::size_t a = 0; a < measured.rows; ++a) {
        if (!mask.missing(a)) m += row_sum(measured, a);
        p += row_sum(prior, a);
    }
    m /= double(mask.n_observed());
    p /= double(prior.rows);
    if (!(p > 0.0)) throw InvariantError("scale_prior: prior sinogram has no mass");
    return m / p;
}

Array2D scale_prior(const Array2D& measured, const Array2D& prior, const AngularMask& mask) {
    const double alpha = prior_scale_factor(measured, prior, mask);
    Array2D out = prior;
    for (auto& v : out.values) v = float(double(v) * alpha);
    return out;
}

Array2D build_prior_mask(const Array2D& prior, const AngularMask& mask, double rel_threshold) {
    require_angles(prior, mask, "build_prior_mask");
    if (rel_threshold < 0.0) throw ConfigError("build_prior_mask: threshold must be >= 0");
    const float peak = prior.values.empty() ? 0.0f : *std::max_element(prior.values.begin(), prior.values.end());
    const double thr = rel_threshold * double(peak);
    Array2D out(prior.rows, prior.cols);
    for (std::size_t a = mask.start; a < mask.start + mask.count; ++a)
        for (std::size_t k = 0; k < prior.cols; ++k) out(a, k) = double(prior(a, k)) > thr ? 1.0f : 0.0f;
    return out;
}

float Normalization::normalize(float v) const {
    return float(std::clamp(double(v) / constant, 0.0, 1.0));
}

Array2D Normalization::normalize(const Array2D& a) const {
    Array2D out = a;
    for (auto& v : out.values) v = normalize(v);
    return out;
}

Array2D Normalization::denormalize(const Array2D& a) const {
    Array2D out = a;
    for (auto& v : out.values) v = denormalize(v);
    return out;
}

GanInput assemble_input(const Array2D& scarce, const Array2D& scaled_prior, const Array2D& pmask,
                        const Normalization& norm) {
    require_same_shape(scarce, scaled_prior, "assemble_input");
    require_same_shape(scarce, pmask, "assemble_input");
    if (!(norm.constant > 0.0)) throw ConfigError("assemble_input: normalization constant must be positive");
    GanInput in;
    in.scarce = norm.normalize(scarce);
    in.prior = norm.normalize(scaled_prior);
    in.mask = pmask;
    for (auto& v : in.mask.values) v = v != 0.0f ? 1.0f : 0.0f;
    in.norm = norm;
    return in;
}

Array2D compose_inpainted(const Array2D& scarce, const Array2D& generated_norm, const Array2D& pmask,
                          const Normalization& norm) {
    require_same_shape(scarce, generated_norm, "compose_inpainted");
    require_same_shape(scarce, pmask, "compose_inpainted");
    Array2D out = scarce;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (pmask.values[i] != 0.0f) out.values[i] = norm.denormalize(generated_norm.values[i]);
    }
    return out;
}

}  // namespace sinpaint::ops
