#pragma once

#include "sinpaint/array2d.hpp"
#include "sinpaint/ops/sinogram_ops.hpp"

namespace sinpaint::eval {

struct InterpOptions {
    // Neighbours reached across the 0/180 degree seam are detector-flipped
    // (R(theta + pi, s) = R(theta, -s)) instead of used as-is.
    bool conjugate_wrap = false;
};

// Each missing row is the distance-weighted blend of the nearest observed rows
// before and after it, with the angle axis treated cyclically.
Array2D linear_interp(const Array2D& scarce, const ops::AngularMask& mask, const InterpOptions& opts = {});

// Missing rows are taken from the prior sinogram, optionally rescaled by the
// mass ratio first. Observed rows are copied from `scarce`.
Array2D cad_replace(const Array2D& scarce, const Array2D& prior, const ops::AngularMask& mask, bool scaled);

}  // namespace sinpaint::eval
