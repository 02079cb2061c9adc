#include "aiv/appearance.hpp"

#include <algorithm>
#include <cmath>

namespace aiv {

Feature appearance_embed(const Raster& frame, const BBox& box) {
    const auto rect = crop_rect(box, frame.width, frame.height);
    if (rect.empty()) throw AppearanceError("crop is empty after clipping to the frame");
    std::vector<double> hist(kFeatureSize, 0.0);
    constexpr int shift = 5;  // 256 / 8 levels
    for (int y = rect.y0; y < rect.y1; ++y) {
        const std::uint8_t* p = frame.pixel(rect.x0, y);
        for (int x = rect.x0; x < rect.x1; ++x, p += 3) {
            const int bin = ((p[0] >> shift) * kColorLevels + (p[1] >> shift)) * kColorLevels + (p[2] >> shift);
            hist[static_cast<std::size_t>(bin)] += 1.0;
        }
    }
    double norm = 0.0;
    for (double h : hist) norm += h * h;
    norm = std::sqrt(norm);
    Feature f(kFeatureSize);
    for (std::size_t i = 0; i < hist.size(); ++i) f[i] = static_cast<float>(hist[i] / norm);
    return f;
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw AppearanceError("feature size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw AppearanceError("cosine distance of a zero vector");
    return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

void normalize(Feature& f) {
    double n = 0.0;
    for (float v : f) n += static_cast<double>(v) * v;
    if (n == 0.0) throw AppearanceError("cannot normalize a zero vector");
    n = std::sqrt(n);
    for (float& v : f) v = static_cast<float>(v / n);
}

}  // namespace aiv
