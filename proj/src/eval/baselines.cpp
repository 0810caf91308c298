#include "sinpaint/eval/baselines.hpp"

#include <algorithm>
#include <string>

namespace sinpaint::eval {

namespace {

void require_angles(const Array2D& s, const ops::AngularMask& m, const char* what) {
    if (s.rows != m.n_angles) {
        throw ShapeError(std::string(what) + ": sinogram has " + std::to_string(s.rows) + " angles, mask expects " +
                         std::to_string(m.n_angles));
    }
}

}  // namespace

Array2D linear_interp(const Array2D& scarce, const ops::AngularMask& mask, const InterpOptions& opts) {
    require_angles(scarce, mask, "linear_interp");
    const std::size_t n = scarce.rows;
    if (mask.n_observed() == 0) throw ConfigError("linear_interp: every angle is missing");
    const auto observed = mask.observed();
    Array2D out = scarce;
    std::vector<float> before(scarce.cols), after(scarce.cols);
    for (std::size_t a = 0; a < n; ++a) {
        if (observed[a]) continue;
        std::size_t db = 1, da = 1;
        while (!observed[(a + n - db) % n]) ++db;
        while (!observed[(a + da) % n]) ++da;
        const std::size_t ib = (a + n - db) % n, ia = (a + da) % n;
        std::copy(scarce.row(ib).begin(), scarce.row(ib).end(), before.begin());
        std::copy(scarce.row(ia).begin(), scarce.row(ia).end(), after.begin());
        if (opts.conjugate_wrap) {
            if (db > a) std::reverse(before.begin(), before.end());
            if (a + da >= n) std::reverse(after.begin(), after.end());
        }
        const double wb = double(da) / double(da + db), wa = double(db) / double(da + db);
        auto row = out.row(a);
        for (std::size_t k = 0; k < scarce.cols; ++k) row[k] = float(wb * before[k] + wa * after[k]);
    }
    return out;
}

Array2D cad_replace(const Array2D& scarce, const Array2D& prior, const ops::AngularMask& mask, bool scaled) {
    require_same_shape(scarce, prior, "cad_replace");
    require_angles(scarce, mask, "cad_replace");
    const Array2D source = scaled ? ops::scale_prior(scarce, prior, mask) : prior;
    Array2D out = scarce;
    for (std::size_t a = mask.start; a < mask.start + mask.count; ++a) {
        std::copy(source.row(a).begin(), source.row(a).end(), out.row(a).begin());
    }
    return out;
}

}  // namespace sinpaint::eval
