#pragma once

#include <cstddef>
#include <vector>

#include "sinpaint/array2d.hpp"
#include "sinpaint/rng.hpp"

namespace sinpaint::ops {

// One contiguous block of missing angles [start, start + count).
struct AngularMask {
    std::size_t n_angles = 0;
    std::size_t start = 0;
    std::size_t count = 0;

    AngularMask() = default;
    AngularMask(std::size_t n, std::size_t start, std::size_t count);

    // count = max(1, floor(fraction * n)); fraction must lie in [0.05, 0.95].
    static std::size_t missing_count(std::size_t n, double fraction);
    static AngularMask from_fraction(std::size_t n, double fraction, std::size_t start);
    // Start drawn uniformly from [0, n - count].
    static AngularMask random(std::size_t n, double fraction, Rng& rng);

    double fraction() const { return n_angles ? double(count) / double(n_angles) : 0.0; }
    bool missing(std::size_t a) const { return a >= start && a < start + count; }
    std::vector<bool> observed() const;
    std::size_t n_observed() const { return n_angles - count; }
};

Array2D apply_mask(const Array2D& full, const AngularMask& mask);

// alpha = (mean per-angle mass of `measured` over observed rows) /
//         (mean per-angle mass of `prior` over all rows).
double prior_scale_factor(const Array2D& measured, const Array2D& prior, const AngularMask& mask);
Array2D scale_prior(const Array2D& measured, const Array2D& prior, const AngularMask& mask);

// 1 where the angle is missing and prior > rel_threshold * max(prior), else 0.
Array2D build_prior_mask(const Array2D& prior, const AngularMask& mask, double rel_threshold = 1e-6);

// Dataset-level scaling of sinogram values into [0, 1].
struct Normalization {
    double constant = 1.0;
    float normalize(float v) const;
    float denormalize(float v) const { return float(double(v) * constant); }
    Array2D normalize(const Array2D& a) const;
    Array2D denormalize(const Array2D& a) const;
};

struct GanInput {
    Array2D scarce;  // normalized
    Array2D prior;   // normalized scaled prior
    Array2D mask;    // binary prior mask
    Normalization norm;
};

GanInput assemble_input(const Array2D& scarce, const Array2D& scaled_prior, const Array2D& pmask,
                        const Normalization& norm);

// Observed pixels keep the scarce values bit-for-bit; pixels with pmask != 0
// take denormalize(generated).
Array2D compose_inpainted(const Array2D& scarce, const Array2D& generated_norm, const Array2D& pmask,
                          const Normalization& norm);

}  // namespace sinpaint::ops
