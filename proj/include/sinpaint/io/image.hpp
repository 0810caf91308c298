#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sinpaint/array2d.hpp"

namespace sinpaint::io {

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 255) : width(w), height(h), pixels(w * h * 3, fill) {}
    void set(long x, long y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

void write_png(const std::filesystem::path& path, const RgbImage& image);
// 8-bit grayscale, min-max scaled; a constant array maps to black.
void write_png(const std::filesystem::path& path, const Array2D& values);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::size_t width = 640;
    std::size_t height = 420;
};

// Axes with tick labels, one coloured polyline with markers per series, and a legend.
RgbImage render(const LinePlot& plot);

}  // namespace sinpaint::io
