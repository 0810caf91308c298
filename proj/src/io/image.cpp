#include "sinpaint/io/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>

#include "sinpaint/errors.hpp"

namespace sinpaint::io {

void RgbImage::set(long x, long y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || std::size_t(x) >= width || std::size_t(y) >= height) return;
    auto* p = &pixels[(std::size_t(y) * width + std::size_t(x)) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

namespace {

void write_rows(const std::filesystem::path& path, std::size_t w, std::size_t h, int color_type,
                const std::vector<std::uint8_t>& data, std::size_t channels) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw ConfigError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ConfigError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ConfigError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < h; ++r) {
        png_write_row(png, const_cast<png_bytep>(data.data() + r * w * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// 5x7 glyphs, one byte per row, bit 4 = leftmost column. Lower case renders as upper case.
const std::array<std::uint8_t, 7>* glyph(char c) {
    struct Entry {
        char c;
        std::array<std::uint8_t, 7> rows;
    };
    static const Entry font[] = {
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
        {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    };
    const char u = (c >= 'a' && c <= 'z') ? char(c - 'a' + 'A') : c;
    for (const auto& e : font)
        if (e.c == u) return &e.rows;
    return nullptr;
}

using Color = std::array<std::uint8_t, 3>;

void text(RgbImage& img, long x, long y, const std::string& s, Color col = {0, 0, 0}) {
    for (char c : s) {
        if (const auto* g = glyph(c)) {
            for (int r = 0; r < 7; ++r)
                for (int k = 0; k < 5; ++k)
                    if ((*g)[r] & (0x10 >> k)) img.set(x + k, y + r, col[0], col[1], col[2]);
        }
        x += 6;
    }
}

void text_vertical(RgbImage& img, long x, long y, const std::string& s) {
    for (char c : s) {
        if (const auto* g = glyph(c)) {
            for (int r = 0; r < 7; ++r)
                for (int k = 0; k < 5; ++k)
                    if ((*g)[r] & (0x10 >> k)) img.set(x + r, y - k, 0, 0, 0);
        }
        y -= 6;
    }
}

void line(RgbImage& img, double x0, double y0, double x1, double y1, Color c, int thick = 1) {
    const int steps = int(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int i = 0; i <= steps; ++i) {
        const double t = double(i) / steps;
        const long x = std::lround(x0 + t * (x1 - x0)), y = std::lround(y0 + t * (y1 - y0));
        for (int dx = -(thick / 2); dx <= thick / 2; ++dx)
            for (int dy = -(thick / 2); dy <= thick / 2; ++dy) img.set(x + dx, y + dy, c[0], c[1], c[2]);
    }
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    if (image.pixels.size() != image.width * image.height * 3) throw ShapeError("write_png: pixel buffer size");
    write_rows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, image.pixels, 3);
}

void write_png(const std::filesystem::path& path, const Array2D& values) {
    if (values.size() == 0) throw ShapeError("write_png: empty array");
    const auto [lo, hi] = std::minmax_element(values.values.begin(), values.values.end());
    const double span = double(*hi) - double(*lo);
    std::vector<std::uint8_t> gray(values.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        gray[i] = span > 0.0 ? std::uint8_t(std::lround(255.0 * (double(values.values[i]) - *lo) / span)) : 0;
    }
    write_rows(path, values.cols, values.rows, PNG_COLOR_TYPE_GRAY, gray, 1);
}

RgbImage render(const LinePlot& plot) {
    static const Color palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                                    {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};
    RgbImage img(plot.width, plot.height);
    const long left = 70, right = long(plot.width) - 150, top = 40, bottom = long(plot.height) - 50;

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : plot.series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * double(right - left); };
    auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * double(bottom - top); };

    const Color axis{0, 0, 0}, grid{225, 225, 225};
    for (int i = 0; i <= 5; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 5.0, xv = xmin + (xmax - xmin) * i / 5.0;
        line(img, double(left), py(yv), double(right), py(yv), grid);
        line(img, px(xv), double(top), px(xv), double(bottom), grid);
        const auto yl = tick_label(yv), xl = tick_label(xv);
        text(img, left - 6 - long(6 * yl.size()), std::lround(py(yv)) - 3, yl);
        text(img, std::lround(px(xv)) - long(3 * xl.size()), bottom + 8, xl);
    }
    line(img, double(left), double(top), double(left), double(bottom), axis);
    line(img, double(left), double(bottom), double(right), double(bottom), axis);
    text(img, left, 15, plot.title);
    text(img, (left + right) / 2 - long(3 * plot.x_label.size()), bottom + 26, plot.x_label);
    text_vertical(img, 12, (top + bottom) / 2 + long(3 * plot.y_label.size()), plot.y_label);

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const Color c = palette[k % std::size(palette)];
        for (std::size_t i = 0; i + 1 < s.x.size() && i + 1 < s.y.size(); ++i) {
            if (std::isfinite(s.y[i]) && std::isfinite(s.y[i + 1]))
                line(img, px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), c, 2);
        }
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            for (int dx = -3; dx <= 3; ++dx)
                for (int dy = -3; dy <= 3; ++dy) img.set(std::lround(px(s.x[i])) + dx, std::lround(py(s.y[i])) + dy, c[0], c[1], c[2]);
        }
        const long ly = top + 10 + long(k) * 16;
        line(img, double(right + 12), double(ly + 3), double(right + 30), double(ly + 3), c, 3);
        text(img, right + 36, ly, s.name);
    }
    return img;
}

}  // namespace sinpaint::io
