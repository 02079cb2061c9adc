#include "aiv/detector.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <thread>

namespace aiv {

PrecomputedDetector::PrecomputedDetector(const std::vector<Detection>& detections) {
    for (const auto& d : detections) by_frame_[d.frame].push_back(d);
}

std::vector<Detection> PrecomputedDetector::detect(std::int64_t frame, const FrameSource&) {
    const auto it = by_frame_.find(frame);
    return it == by_frame_.end() ? std::vector<Detection>{} : it->second;
}

SimulatedLatencyDetector::SimulatedLatencyDetector(std::unique_ptr<Detector> inner,
                                                   std::chrono::microseconds per_frame)
    : inner_(std::move(inner)), per_frame_(per_frame) {}

std::vector<Detection> SimulatedLatencyDetector::detect(std::int64_t frame, const FrameSource& source) {
    const auto deadline = std::chrono::steady_clock::now() + per_frame_;
    auto dets = inner_->detect(frame, source);
    std::this_thread::sleep_until(deadline);
    return dets;
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

}  // namespace

DetectionStream run_inference_adapter(const FrameSource& source, const AdapterSpec& spec,
                                      const std::string& source_ref) {
    if (spec.executable.empty() || ::access(spec.executable.c_str(), X_OK) != 0) {
        throw AdapterError("inference adapter unavailable: " + spec.executable);
    }
    std::string cmd = shell_quote(spec.executable) + " --model " + shell_quote(spec.model) + " --source " +
                      shell_quote(source_ref) + " --width " + std::to_string(source.width()) + " --height " +
                      std::to_string(source.height()) + " --frames " + std::to_string(source.frame_count());
    for (const auto& a : spec.args) cmd += " " + shell_quote(a);

    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw AdapterError("failed to launch inference adapter");
    std::string output;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) output.append(buf, n);
    const int status = ::pclose(pipe);

    // Each record is checked on its own (with the header for clipping) so a
    // bad record can be reported against its frame.
    std::string header_line;
    std::string accepted;
    std::int64_t last_frame = -1;
    bool first = true;
    std::size_t pos = 0;
    while (pos < output.size()) {
        std::size_t end = output.find('\n', pos);
        if (end == std::string::npos) end = output.size();
        const std::string line = output.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto parsed = parse_detection_stream(header_line + line + "\n");
            if (first && parsed.header && parsed.detections.empty()) header_line = line + "\n";
            for (const auto& d : parsed.detections) last_frame = d.frame;
        } catch (const ParseError& e) {
            std::int64_t frame = last_frame + 1;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_object() && j.contains("frame") && j["frame"].is_number_integer()) {
                frame = j["frame"].get<std::int64_t>();
            }
            throw AdapterError("inference adapter emitted a malformed record at frame " + std::to_string(frame) +
                               ": " + e.what());
        }
        first = false;
        accepted += line + "\n";
    }
    if (status != 0) {
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : status;
        throw AdapterError("inference adapter failed at frame " + std::to_string(last_frame + 1) +
                           " (exit status " + std::to_string(code) + ")");
    }
    return parse_detection_stream(accepted);
}

}  // namespace aiv
