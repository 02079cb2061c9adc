#include "aiv/pipeline.hpp"

#include <chrono>
#include <optional>

namespace aiv {

PipelineResult run_pipeline(const FrameSource& source, Detector& detector, const PipelineOptions& options) {
    using clock = std::chrono::steady_clock;
    options.tracker.validate();
    options.detector.validate();

    std::optional<MaskRaster> mask;
    if (!options.mask.empty()) mask = rasterize_mask(options.mask, source.width(), source.height());
    const bool want_pixels = options.tracker.appearance_enabled || options.gallery != nullptr;
    if (options.tracker.appearance_enabled && !source.has_pixels()) {
        throw PipelineError(0, "appearance matching needs a pixel source");
    }

    Tracker tracker(options.tracker);
    PipelineResult result;
    const auto n = source.frame_count();
    result.outputs.reserve(static_cast<std::size_t>(n));
    const auto start = clock::now();
    for (std::int64_t i = 0; i < n; ++i) {
        if (options.cancel && options.cancel->load()) throw PipelineError(i, "cancelled");
        const auto t0 = clock::now();
        FrameOutput out;
        try {
            std::optional<Raster> raster;
            if (want_pixels && source.has_pixels()) raster = source.get_frame(i);
            const auto dets = detector.detect(i, source);
            const auto bands = filter_detections(dets, options.detector, mask ? &*mask : nullptr,
                                                 FrameSize{source.width(), source.height()},
                                                 options.tracker.score_low);
            out = tracker.step(i, bands.high, bands.low, raster ? &*raster : nullptr);
            if (options.gallery && raster) {
                for (const auto& t : out.tracks) options.gallery->register_template(t, i, &*raster);
            }
        } catch (const PipelineError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError(i, e.what());
        }
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        result.frame_seconds.push_back(dt);
        if (options.on_frame) options.on_frame(out, dt);
        result.outputs.push_back(std::move(out));
    }
    result.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return result;
}

CacheHeader make_cache_header(const FrameSource& source, const FileIdentity& video, const TrackerParams& tracker,
                              const DetectorConfig& detector) {
    CacheHeader h;
    h.video = video;
    h.width = source.width();
    h.height = source.height();
    h.frame_count = source.frame_count();
    h.nominal_fps = source.nominal_fps();
    h.config_hash = config_hash(tracker, detector);
    h.created_at = utc_timestamp();
    h.config = {{"tracker", tracker.to_json()}, {"detector", detector_config_to_json(detector)}};
    return h;
}

}  // namespace aiv
