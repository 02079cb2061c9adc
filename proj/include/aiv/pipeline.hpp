#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiv/cache.hpp"
#include "aiv/detector.hpp"
#include "aiv/frame_source.hpp"
#include "aiv/gallery.hpp"
#include "aiv/geom.hpp"
#include "aiv/tracker.hpp"

namespace aiv {

struct PipelineOptions {
    TrackerParams tracker;
    DetectorConfig detector;
    std::vector<Polygon> mask;  // excluded regions
    Gallery* gallery = nullptr;  // register templates when pixels are available
    /// Called after every frame with the frame's output and its wall time.
    std::function<void(const FrameOutput&, double)> on_frame;
    const std::atomic<bool>* cancel = nullptr;
};

struct PipelineResult {
    std::vector<FrameOutput> outputs;
    std::vector<double> frame_seconds;
    double seconds = 0.0;
};

class PipelineError : public std::runtime_error {
public:
    PipelineError(std::int64_t frame, const std::string& what)
        : std::runtime_error("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}
    std::int64_t frame() const noexcept { return frame_; }

private:
    std::int64_t frame_;
};

/// filter -> track -> (gallery) for every frame of the source, in order.
PipelineResult run_pipeline(const FrameSource& source, Detector& detector, const PipelineOptions& options);

CacheHeader make_cache_header(const FrameSource& source, const FileIdentity& video, const TrackerParams& tracker,
                              const DetectorConfig& detector);

}  // namespace aiv
