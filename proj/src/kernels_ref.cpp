#include "aiv/kernels.hpp"

namespace aiv::reference {

Matrix iou_matrix(std::span<const BBox> rows, std::span<const BBox> cols) {
    Matrix m(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) m(r, c) = iou(rows[r], cols[c]);
    }
    return m;
}

void rasterize(std::span<const Polygon> polys, MaskRaster& mask) {
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const Point c{x + 0.5, y + 0.5};
            for (const auto& poly : polys) {
                if (point_in_polygon(c, poly)) {
                    mask.set(x, y, true);
                    break;
                }
            }
        }
    }
}

}  // namespace aiv::reference
