#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aiv/geom.hpp"

namespace aiv {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    bool empty() const noexcept { return rows == 0 || cols == 0; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Data-parallel kernels (OpenMP). Each has a serial twin in `reference` with
// identical results; the tests compare the two bit for bit.
namespace kernels {

Matrix iou_matrix(std::span<const BBox> rows, std::span<const BBox> cols);
void rasterize(std::span<const Polygon> polys, MaskRaster& mask);

}  // namespace kernels

namespace reference {

Matrix iou_matrix(std::span<const BBox> rows, std::span<const BBox> cols);
void rasterize(std::span<const Polygon> polys, MaskRaster& mask);

}  // namespace reference

}  // namespace aiv
