#include "aiv/frame_source.hpp"

#include <algorithm>
#include <stdexcept>

namespace aiv {

Raster FrameSource::get_frame(std::int64_t) const {
    throw std::runtime_error("frame source has no pixel data");
}

HeadlessSource::HeadlessSource(std::int64_t frame_count, int width, int height, double fps)
    : frame_count_(frame_count), width_(width), height_(height), fps_(fps) {
    if (frame_count < 0 || width <= 0 || height <= 0 || fps <= 0.0) {
        throw std::invalid_argument("invalid headless source geometry");
    }
}

ImageDirectorySource::ImageDirectorySource(const std::filesystem::path& dir, double fps) : fps_(fps) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".png" || ext == ".ppm")) files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end());
    if (files_.empty()) throw std::runtime_error("no frames in " + dir.string());
    const Raster first = read_image(files_.front().string());
    width_ = first.width;
    height_ = first.height;
}

Raster ImageDirectorySource::get_frame(std::int64_t index) const {
    if (index < 0 || index >= frame_count()) throw std::out_of_range("frame index out of range");
    Raster img = read_image(files_[static_cast<std::size_t>(index)].string());
    if (img.width != width_ || img.height != height_) {
        throw std::runtime_error("frame " + std::to_string(index) + " has inconsistent size");
    }
    return img;
}

GeneratedSource::GeneratedSource(std::int64_t frame_count, int width, int height, double fps, Renderer render)
    : frame_count_(frame_count), width_(width), height_(height), fps_(fps), render_(std::move(render)) {}

Raster GeneratedSource::get_frame(std::int64_t index) const {
    if (index < 0 || index >= frame_count_) throw std::out_of_range("frame index out of range");
    return render_(index);
}

std::int64_t implied_frame_count(const DetectionStream& stream) {
    return stream.detections.empty() ? 0 : stream.detections.back().frame + 1;
}

}  // namespace aiv
