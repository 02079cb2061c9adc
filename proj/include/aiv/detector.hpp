#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiv/detection.hpp"
#include "aiv/frame_source.hpp"

namespace aiv {

/// Per-frame detection provider consumed by the pipeline.
class Detector {
public:
    virtual ~Detector() = default;
    virtual std::vector<Detection> detect(std::int64_t frame, const FrameSource& source) = 0;
};

/// Serves detections from an already parsed stream.
class PrecomputedDetector final : public Detector {
public:
    explicit PrecomputedDetector(const std::vector<Detection>& detections);
    std::vector<Detection> detect(std::int64_t frame, const FrameSource& source) override;

private:
    std::map<std::int64_t, std::vector<Detection>> by_frame_;
};

/// Wraps another detector and charges a fixed wall-clock cost per frame,
/// standing in for network inference when measuring throughput.
class SimulatedLatencyDetector final : public Detector {
public:
    SimulatedLatencyDetector(std::unique_ptr<Detector> inner, std::chrono::microseconds per_frame);
    std::vector<Detection> detect(std::int64_t frame, const FrameSource& source) override;

private:
    std::unique_ptr<Detector> inner_;
    std::chrono::microseconds per_frame_;
};

/// External inference process. It is invoked as
///   <executable> --model <model> --source <source_ref> --width W --height H --frames N [args...]
/// and must print a detection stream (same schema as .dets.jsonl) on stdout.
struct AdapterSpec {
    std::string executable;
    std::string model;
    std::vector<std::string> args;
};

class AdapterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

DetectionStream run_inference_adapter(const FrameSource& source, const AdapterSpec& spec,
                                      const std::string& source_ref);

}  // namespace aiv
