#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sinpaint/errors.hpp"

namespace sinpaint {

// Row-major float32 grid. Used for slices ([side, side]) and sinograms
// ([n_angles, n_detectors]).
struct Array2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    Array2D() = default;
    Array2D(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), values(r * c, fill) {}
    Array2D(std::size_t r, std::size_t c, std::vector<float> v) : rows(r), cols(c), values(std::move(v)) {
        if (values.size() != r * c) {
            throw ShapeError("Array2D: " + std::to_string(values.size()) + " values for " +
                             std::to_string(r) + "x" + std::to_string(c));
        }
    }

    float& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    std::span<float> row(std::size_t r) { return {values.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    std::size_t size() const { return values.size(); }
    bool same_shape(const Array2D& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

    bool operator==(const Array2D&) const = default;
};

inline void require_same_shape(const Array2D& a, const Array2D& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace sinpaint
