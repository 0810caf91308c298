#pragma once

#include "sinpaint/array2d.hpp"
#include "sinpaint/ops/sinogram_ops.hpp"

namespace sinpaint::eval {

// Returned when the mean squared error is below 1e-12, and the upper bound otherwise.
inline constexpr double kPsnrCap = 99.0;

// Data range is max(truth) - min(truth); a constant ground truth is rejected.
double psnr(const Array2D& pred, const Array2D& truth);

struct SsimOptions {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

// Mean of the local SSIM map over every position where the Gaussian window
// fits inside the image. Range as in psnr().
double ssim(const Array2D& pred, const Array2D& truth, const SsimOptions& opts = {});
// Same statistic with an explicit data range.
double ssim_with_range(const Array2D& a, const Array2D& b, double range, const SsimOptions& opts = {});

// Mean absolute error over the rows the mask marks as missing.
double missing_row_l1(const Array2D& pred, const Array2D& truth, const ops::AngularMask& mask);

}  // namespace sinpaint::eval
