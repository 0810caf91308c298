#pragma once

#include <cstddef>
#include <vector>

#include "sinpaint/array2d.hpp"

namespace sinpaint::tomo {

// Parallel-beam acquisition over a half turn. Angle a is a * angle_span / n_angles.
struct Geometry {
    std::size_t n_detectors = 256;
    std::size_t n_angles = 256;
    double angle_span = 3.14159265358979323846;
    double pixel_pitch = 1.0;
    double detector_pitch = 1.0;

    double angle(std::size_t a) const { return angle_span * double(a) / double(n_angles); }
    void validate() const;
};

// Joseph (linear-interpolation) ray tracer on a square image whose side equals
// n_detectors. Pixel (i, j) has center (j - c, i - c), c = (side - 1) / 2, in
// pixel-pitch units; detector bin k sits at offset (k - (D - 1) / 2).
// backproject() is the exact transpose of forward().
class Projector {
public:
    explicit Projector(Geometry geom);

    const Geometry& geometry() const { return geom_; }
    std::size_t side() const { return geom_.n_detectors; }

    Array2D forward(const Array2D& image) const;
    Array2D backproject(const Array2D& sino) const;

    // Double-precision variants used by SIRT; sizes side*side and
    // n_angles*n_detectors.
    void forward(const std::vector<double>& image, std::vector<double>& sino) const;
    void backproject(const std::vector<double>& sino, std::vector<double>& image) const;

private:
    template <typename In, typename Out, bool Transpose>
    void trace(const In* src, Out* dst) const;

    Geometry geom_;
    std::vector<double> cos_, sin_;
};

Array2D radon(const Array2D& image, const Geometry& geom);

struct SirtOptions {
    std::size_t iterations = 200;
    double relaxation = 1.0;
    double eps = 1e-8;
    bool nonnegative = false;
};

// Simultaneous iterative reconstruction:
//   x <- x + relaxation * C A^T R (p - A x)
// with R = 1 / row sums and C = 1 / column sums of A over the rows in use.
// `observed` (one flag per angle) gives missing angles zero weight; empty
// means all rows are used. If `residuals` is non-null it receives
// ||A x_k - p|| over used rows after each iteration.
Array2D sirt(const Array2D& sino, const Geometry& geom, const SirtOptions& opts = {},
             const std::vector<bool>& observed = {}, std::vector<double>* residuals = nullptr);

}  // namespace sinpaint::tomo
