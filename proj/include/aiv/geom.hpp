#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace aiv {

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box in pixel space: top-left corner plus size. Sub-pixel
/// values are allowed; integer conversion only happens when cropping.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    /// Validating factory. Throws GeometryError on non-finite values or a
    /// non-positive size.
    static BBox make(double x, double y, double w, double h);

    bool valid() const noexcept;
    double area() const noexcept { return w * h; }
    double right() const noexcept { return x + w; }
    double bottom() const noexcept { return y + h; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

double iou(const BBox& a, const BBox& b) noexcept;
Point center(const BBox& b) noexcept;

/// Simple closed polygon, validated on construction (>= 3 vertices, finite,
/// non-zero area, no self-intersections).
class Polygon {
public:
    explicit Polygon(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }

    friend bool operator==(const Polygon&, const Polygon&) = default;

private:
    std::vector<Point> vertices_;
};

/// Inside-or-on-boundary test (even-odd rule for the interior).
bool point_in_polygon(Point p, const Polygon& poly) noexcept;

/// Bit-per-pixel exclusion raster, row-major.
class MaskRaster {
public:
    MaskRaster(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool excluded(int x, int y) const noexcept {
        return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }
    void set(int x, int y, bool value) noexcept {
        bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
    }
    std::size_t excluded_count() const noexcept;

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    friend bool operator==(const MaskRaster&, const MaskRaster&) = default;

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

/// A pixel is excluded iff its center lies in any polygon. Parts of polygons
/// outside the frame are ignored.
MaskRaster rasterize_mask(std::span<const Polygon> polys, int width, int height);

// {"vertices": [[x, y], ...]}
nlohmann::json polygon_to_json(const Polygon& poly);
Polygon polygon_from_json(const nlohmann::json& j);

nlohmann::json polygons_to_json(std::span<const Polygon> polys);
std::vector<Polygon> polygons_from_json(const nlohmann::json& j);

}  // namespace aiv
