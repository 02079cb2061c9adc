#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aiv/geom.hpp"

namespace aiv {

/// 8-bit interleaved RGB image.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Raster() = default;
    Raster(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

    std::uint8_t* pixel(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* pixel(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }

    void fill_rect(const BBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    friend bool operator==(const Raster&, const Raster&) = default;
};

/// Integer pixel window covering a box, clipped to the raster.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
};

PixelRect crop_rect(const BBox& box, int width, int height) noexcept;
Raster crop(const Raster& src, const PixelRect& rect);

std::vector<std::uint8_t> encode_png(const Raster& img);
Raster decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::string& path, const Raster& img);
Raster read_image(const std::string& path);  // PNG or binary PPM (P6)

}  // namespace aiv
