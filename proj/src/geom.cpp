#include "aiv/geom.hpp"

#include <algorithm>
#include <cmath>

#include "aiv/kernels.hpp"

namespace aiv {

BBox BBox::make(double x, double y, double w, double h) {
    BBox b{x, y, w, h};
    if (!b.valid()) {
        throw GeometryError("invalid box: size must be positive and finite");
    }
    return b;
}

bool BBox::valid() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
           h > 0.0;
}

double iou(const BBox& a, const BBox& b) noexcept {
    if (&a == &b || a == b) return 1.0;
    const double ix = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double iy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Point center(const BBox& b) noexcept { return {b.x + b.w / 2.0, b.y + b.h / 2.0}; }

namespace {

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(Point p, Point a, Point b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
    const int d1 = sign(cross(q1, q2, p1));
    const int d2 = sign(cross(q1, q2, p2));
    const int d3 = sign(cross(p1, p2, q1));
    const int d4 = sign(cross(p1, p2, q2));
    if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0) return true;
    if (d1 == 0 && on_segment(p1, q1, q2)) return true;
    if (d2 == 0 && on_segment(p2, q1, q2)) return true;
    if (d3 == 0 && on_segment(q1, p1, p2)) return true;
    if (d4 == 0 && on_segment(q2, p1, p2)) return true;
    return false;
}

bool point_on_edge(Point p, Point a, Point b) {
    constexpr double tol = 1e-9;
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (std::abs(cross(a, b, p)) > tol * len) return false;
    return std::min(a.x, b.x) - tol <= p.x && p.x <= std::max(a.x, b.x) + tol &&
           std::min(a.y, b.y) - tol <= p.y && p.y <= std::max(a.y, b.y) + tol;
}

}  // namespace

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    const std::size_t n = vertices_.size();
    if (n < 3) throw GeometryError("polygon needs at least 3 vertices");
    for (const auto& v : vertices_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw GeometryError("polygon vertex not finite");
    }
    double twice_area = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = vertices_[i];
        const Point b = vertices_[(i + 1) % n];
        twice_area += a.x * b.y - b.x * a.y;
    }
    if (twice_area == 0.0) throw GeometryError("polygon has zero area");

    // Non-adjacent edges must not touch; adjacent edges may only share their
    // common vertex (no fold-back).
    for (std::size_t i = 0; i < n; ++i) {
        const Point a1 = vertices_[i];
        const Point a2 = vertices_[(i + 1) % n];
        if (a1 == a2) throw GeometryError("polygon has repeated consecutive vertex");
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point b1 = vertices_[j];
            const Point b2 = vertices_[(j + 1) % n];
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                const Point shared = (j == i + 1) ? a2 : a1;
                const Point other_a = (j == i + 1) ? a1 : a2;
                const Point other_b = (j == i + 1) ? b2 : b1;
                if (cross(shared, other_a, other_b) == 0.0) {
                    const double dot = (other_a.x - shared.x) * (other_b.x - shared.x) +
                                       (other_a.y - shared.y) * (other_b.y - shared.y);
                    if (dot > 0.0) throw GeometryError("polygon edges fold back on each other");
                }
                continue;
            }
            if (segments_intersect(a1, a2, b1, b2)) throw GeometryError("polygon is self-intersecting");
        }
    }
}

bool point_in_polygon(Point p, const Polygon& poly) noexcept {
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (point_on_edge(p, v[j], v[i])) return true;
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            const double x_cross = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

MaskRaster::MaskRaster(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw GeometryError("mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t MaskRaster::excluded_count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

MaskRaster rasterize_mask(std::span<const Polygon> polys, int width, int height) {
    MaskRaster mask(width, height);
    kernels::rasterize(polys, mask);
    return mask;
}

nlohmann::json polygon_to_json(const Polygon& poly) {
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& p : poly.vertices()) verts.push_back({p.x, p.y});
    return {{"vertices", std::move(verts)}};
}

Polygon polygon_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("vertices") || !j.at("vertices").is_array()) {
        throw GeometryError("polygon JSON must be {\"vertices\": [[x,y], ...]}");
    }
    std::vector<Point> pts;
    for (const auto& v : j.at("vertices")) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            throw GeometryError("polygon vertex must be [x, y]");
        }
        pts.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return Polygon(std::move(pts));
}

nlohmann::json polygons_to_json(std::span<const Polygon> polys) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : polys) arr.push_back(polygon_to_json(p));
    return arr;
}

std::vector<Polygon> polygons_from_json(const nlohmann::json& j) {
    const nlohmann::json* list = &j;
    if (j.is_object() && j.contains("polygons")) list = &j.at("polygons");
    if (!list->is_array()) throw GeometryError("expected a list of polygons");
    std::vector<Polygon> out;
    for (const auto& p : *list) out.push_back(polygon_from_json(p));
    return out;
}

}  // namespace aiv
