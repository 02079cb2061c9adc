#include <algorithm>
#include <cmath>

#include "aiv/kernels.hpp"

namespace aiv::kernels {

namespace {

struct PixelSpan {
    int x0, x1, y0, y1;  // inclusive-exclusive, clipped to the frame
};

PixelSpan pixel_bounds(const Polygon& poly, int width, int height) {
    double minx = poly.vertices().front().x, maxx = minx;
    double miny = poly.vertices().front().y, maxy = miny;
    for (const auto& v : poly.vertices()) {
        minx = std::min(minx, v.x);
        maxx = std::max(maxx, v.x);
        miny = std::min(miny, v.y);
        maxy = std::max(maxy, v.y);
    }
    // Pixel i has center i + 0.5; it can only be inside if min <= i + 0.5 <= max.
    auto lo = [](double v, int limit) {
        return static_cast<int>(std::clamp(std::ceil(v - 0.5), 0.0, static_cast<double>(limit)));
    };
    auto hi = [](double v, int limit) {
        return static_cast<int>(std::clamp(std::floor(v - 0.5) + 1.0, 0.0, static_cast<double>(limit)));
    };
    return {lo(minx, width), hi(maxx, width), lo(miny, height), hi(maxy, height)};
}

}  // namespace

Matrix iou_matrix(std::span<const BBox> rows, std::span<const BBox> cols) {
    Matrix m(rows.size(), cols.size());
    const auto n_rows = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static) if (rows.size() * cols.size() > 4096)
    for (std::ptrdiff_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) m(r, c) = iou(rows[r], cols[c]);
    }
    return m;
}

void rasterize(std::span<const Polygon> polys, MaskRaster& mask) {
    std::vector<PixelSpan> bounds;
    bounds.reserve(polys.size());
    for (const auto& p : polys) bounds.push_back(pixel_bounds(p, mask.width(), mask.height()));

    const int height = mask.height();
#pragma omp parallel for schedule(dynamic, 16)
    for (int y = 0; y < height; ++y) {
        for (std::size_t k = 0; k < polys.size(); ++k) {
            const auto& b = bounds[k];
            if (y < b.y0 || y >= b.y1) continue;
            for (int x = b.x0; x < b.x1; ++x) {
                if (mask.excluded(x, y)) continue;
                if (point_in_polygon({x + 0.5, y + 0.5}, polys[k])) mask.set(x, y, true);
            }
        }
    }
}

}  // namespace aiv::kernels
