#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aiv/detection.hpp"
#include "aiv/raster.hpp"

namespace aiv {

/// Provider of frame geometry and, optionally, pixels. Frame indices are
/// dense in [0, frame_count). get_frame must be safe to call concurrently.
class FrameSource {
public:
    virtual ~FrameSource() = default;

    virtual std::int64_t frame_count() const = 0;
    virtual int width() const = 0;
    virtual int height() const = 0;
    virtual double nominal_fps() const = 0;

    virtual bool has_pixels() const { return false; }
    /// Throws when the source is headless or the index is out of range.
    virtual Raster get_frame(std::int64_t index) const;
};

/// Detection-only source: geometry comes from a stream header.
class HeadlessSource final : public FrameSource {
public:
    HeadlessSource(std::int64_t frame_count, int width, int height, double fps);

    std::int64_t frame_count() const override { return frame_count_; }
    int width() const override { return width_; }
    int height() const override { return height_; }
    double nominal_fps() const override { return fps_; }

private:
    std::int64_t frame_count_;
    int width_;
    int height_;
    double fps_;
};

/// Directory of PNG/PPM images, ordered by file name.
class ImageDirectorySource final : public FrameSource {
public:
    ImageDirectorySource(const std::filesystem::path& dir, double fps);

    std::int64_t frame_count() const override { return static_cast<std::int64_t>(files_.size()); }
    int width() const override { return width_; }
    int height() const override { return height_; }
    double nominal_fps() const override { return fps_; }
    bool has_pixels() const override { return true; }
    Raster get_frame(std::int64_t index) const override;

private:
    std::vector<std::filesystem::path> files_;
    int width_ = 0;
    int height_ = 0;
    double fps_;
};

/// Frames rendered on demand by a callback; used for synthetic scenes.
class GeneratedSource final : public FrameSource {
public:
    using Renderer = std::function<Raster(std::int64_t)>;
    GeneratedSource(std::int64_t frame_count, int width, int height, double fps, Renderer render);

    std::int64_t frame_count() const override { return frame_count_; }
    int width() const override { return width_; }
    int height() const override { return height_; }
    double nominal_fps() const override { return fps_; }
    bool has_pixels() const override { return true; }
    Raster get_frame(std::int64_t index) const override;

private:
    std::int64_t frame_count_;
    int width_;
    int height_;
    double fps_;
    Renderer render_;
};

/// Frame count implied by a detection stream: one past the last frame seen.
std::int64_t implied_frame_count(const DetectionStream& stream);

}  // namespace aiv
