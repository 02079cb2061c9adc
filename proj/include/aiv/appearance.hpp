#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aiv/geom.hpp"
#include "aiv/raster.hpp"

namespace aiv {

using Feature = std::vector<float>;

/// Levels per color channel in the default embedding; the histogram is the
/// joint RGB histogram with kColorLevels^3 bins.
inline constexpr int kColorLevels = 8;
inline constexpr int kFeatureSize = kColorLevels * kColorLevels * kColorLevels;

class AppearanceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// L2-normalized joint RGB histogram of the box crop. Throws
/// AppearanceError when the crop is empty after clipping to the frame.
Feature appearance_embed(const Raster& frame, const BBox& box);

/// Pluggable embedding (for a learned ReID model, for example).
using Embedder = std::function<Feature(const Raster&, const BBox&)>;

/// 1 - cos(a, b), in [0, 2]. Throws AppearanceError on a zero vector or a
/// size mismatch.
double cosine_distance(std::span<const float> a, std::span<const float> b);

/// Rescales to unit L2 norm; throws on a zero vector.
void normalize(Feature& f);

}  // namespace aiv
