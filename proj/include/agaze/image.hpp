#pragma once

#include <cstdint>
#include <vector>

#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

namespace agaze {

// 8-bit RGB raster, row-major, interleaved.
struct ImageRgb8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size = width*height*3

    ImageRgb8() = default;
    ImageRgb8(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {
        if (w <= 0 || h <= 0) throw ArgumentError("ImageRgb8 dimensions must be positive");
    }

    std::uint8_t* px(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* px(int x, int y) const {
        return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    }
};

// Planar channel views in [0,1].
inline ScalarMap channel_of(const ImageRgb8& img, int c) {
    ScalarMap m(img.width, img.height, ScalarMap::Kind::Normalized);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) m.values[i] = img.pixels[i * 3 + c] / 255.0;
    return m;
}

inline ScalarMap intensity_of(const ImageRgb8& img) {
    ScalarMap m(img.width, img.height, ScalarMap::Kind::Normalized);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        m.values[i] =
            (img.pixels[i * 3] + img.pixels[i * 3 + 1] + img.pixels[i * 3 + 2]) / (3.0 * 255.0);
    }
    return m;
}

}  // namespace agaze
