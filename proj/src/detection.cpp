#include "aiv/detection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aiv {

std::optional<VehicleClass> class_from_id(int id) noexcept {
    switch (id) {
        case 0: return VehicleClass::Car;
        case 1: return VehicleClass::Bus;
        case 2: return VehicleClass::Truck;
        case 3: return VehicleClass::Motorcycle;
        case 4: return VehicleClass::Bicycle;
        case 255: return VehicleClass::Other;
        default: return std::nullopt;
    }
}

std::string_view class_name(VehicleClass c) noexcept {
    switch (c) {
        case VehicleClass::Car: return "car";
        case VehicleClass::Bus: return "bus";
        case VehicleClass::Truck: return "truck";
        case VehicleClass::Motorcycle: return "motorcycle";
        case VehicleClass::Bicycle: return "bicycle";
        case VehicleClass::Other: return "other";
    }
    return "other";
}

std::optional<VehicleClass> class_from_name(std::string_view name) noexcept {
    for (auto c : kAllClasses) {
        if (class_name(c) == name) return c;
    }
    return std::nullopt;
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

std::optional<BBox> clip_box(const BBox& b, int width, int height) noexcept {
    const double x0 = std::max(b.x, 0.0);
    const double y0 = std::max(b.y, 0.0);
    const double x1 = std::min(b.right(), static_cast<double>(width));
    const double y1 = std::min(b.bottom(), static_cast<double>(height));
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return BBox{x0, y0, x1 - x0, y1 - y0};
}

namespace {

using nlohmann::json;

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
        pos = end + 1;
    }
}

json parse_line(std::size_t line_no, std::string_view line) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
}

std::int64_t require_int(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key)) throw ParseError(line_no, std::string("missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ParseError(line_no, std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

double require_number(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key)) throw ParseError(line_no, std::string("missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw ParseError(line_no, std::string("field '") + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(line_no, std::string("field '") + key + "' must be finite");
    return d;
}

StreamHeader parse_header(const json& j, std::size_t line_no) {
    StreamHeader h;
    h.schema = static_cast<int>(require_int(j, "schema", line_no));
    if (h.schema != 1) throw ParseError(line_no, "unsupported schema " + std::to_string(h.schema));
    h.width = static_cast<int>(require_int(j, "width", line_no));
    h.height = static_cast<int>(require_int(j, "height", line_no));
    h.fps = require_number(j, "fps", line_no);
    if (h.width <= 0 || h.height <= 0) throw ParseError(line_no, "frame size must be positive");
    if (h.fps <= 0.0) throw ParseError(line_no, "fps must be positive");
    return h;
}

struct CommonFields {
    std::int64_t frame;
    VehicleClass cls;
    BBox box;
};

CommonFields parse_common(const json& j, std::size_t line_no, const std::optional<StreamHeader>& header) {
    CommonFields f{};
    f.frame = require_int(j, "frame", line_no);
    if (f.frame < 0) throw ParseError(line_no, "frame index must be >= 0");
    const auto cls = class_from_id(static_cast<int>(require_int(j, "cls", line_no)));
    if (!cls) throw ParseError(line_no, "unknown class id " + j.at("cls").dump());
    f.cls = *cls;

    if (!j.contains("box") || !j.at("box").is_array() || j.at("box").size() != 4) {
        throw ParseError(line_no, "field 'box' must be [x, y, w, h]");
    }
    double v[4];
    for (int i = 0; i < 4; ++i) {
        const auto& e = j.at("box")[i];
        if (!e.is_number()) throw ParseError(line_no, "box entries must be numbers");
        v[i] = e.get<double>();
    }
    BBox box{v[0], v[1], v[2], v[3]};
    if (!box.valid()) throw ParseError(line_no, "box must have positive finite size");
    if (header) {
        const auto clipped = clip_box(box, header->width, header->height);
        if (!clipped) throw ParseError(line_no, "box lies entirely outside the frame");
        box = *clipped;
    }
    f.box = box;
    return f;
}

template <typename Record, typename LineParser>
std::pair<std::optional<StreamHeader>, std::vector<Record>> parse_stream(std::string_view text,
                                                                         LineParser&& parse_record) {
    std::optional<StreamHeader> header;
    std::vector<Record> records;
    bool first = true;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        json j = parse_line(line_no, line);
        if (first && j.contains("schema")) {
            header = parse_header(j, line_no);
            first = false;
            return;
        }
        first = false;
        records.push_back(parse_record(j, line_no, header));
    });
    std::stable_sort(records.begin(), records.end(),
                     [](const Record& a, const Record& b) { return a.frame < b.frame; });
    return {header, std::move(records)};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string box_text(const BBox& b) {
    return "[" + format_number(b.x) + "," + format_number(b.y) + "," + format_number(b.w) + "," +
           format_number(b.h) + "]";
}

std::string header_text(const StreamHeader& h) {
    return R"({"schema":)" + std::to_string(h.schema) + R"(,"width":)" + std::to_string(h.width) +
           R"(,"height":)" + std::to_string(h.height) + R"(,"fps":)" + format_number(h.fps) + "}\n";
}

}  // namespace

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

DetectionStream parse_detection_stream(std::string_view text) {
    auto [header, dets] = parse_stream<Detection>(
        text, [](const json& j, std::size_t line_no, const std::optional<StreamHeader>& h) {
            const auto common = parse_common(j, line_no, h);
            const double score = require_number(j, "score", line_no);
            if (score < 0.0 || score > 1.0) {
                throw ParseError(line_no, "score " + format_number(score) + " outside [0,1]");
            }
            return Detection{common.frame, common.cls, score, common.box};
        });
    return {header, std::move(dets)};
}

GTStream parse_gt_stream(std::string_view text) {
    auto [header, recs] = parse_stream<GTRecord>(
        text, [](const json& j, std::size_t line_no, const std::optional<StreamHeader>& h) {
            const auto common = parse_common(j, line_no, h);
            const auto gt_id = require_int(j, "gt_id", line_no);
            return GTRecord{common.frame, gt_id, common.cls, common.box};
        });
    for (std::size_t i = 1; i < recs.size(); ++i) {
        for (std::size_t k = i; k-- > 0 && recs[k].frame == recs[i].frame;) {
            if (recs[k].gt_id == recs[i].gt_id) {
                throw ParseError(0, "duplicate gt_id " + std::to_string(recs[i].gt_id) + " in frame " +
                                        std::to_string(recs[i].frame));
            }
        }
    }
    return {header, std::move(recs)};
}

DetectionStream read_detection_file(const std::string& path) { return parse_detection_stream(read_file(path)); }
GTStream read_gt_file(const std::string& path) { return parse_gt_stream(read_file(path)); }

std::string serialize_detection_stream(const DetectionStream& stream) {
    std::string out;
    if (stream.header) out += header_text(*stream.header);
    for (const auto& d : stream.detections) {
        out += R"({"frame":)" + std::to_string(d.frame) + R"(,"cls":)" + std::to_string(class_id(d.cls)) +
               R"(,"score":)" + format_number(d.score) + R"(,"box":)" + box_text(d.box) + "}\n";
    }
    return out;
}

std::string serialize_gt_stream(const GTStream& stream) {
    std::string out;
    if (stream.header) out += header_text(*stream.header);
    for (const auto& g : stream.records) {
        out += R"({"frame":)" + std::to_string(g.frame) + R"(,"gt_id":)" + std::to_string(g.gt_id) +
               R"(,"cls":)" + std::to_string(class_id(g.cls)) + R"(,"box":)" + box_text(g.box) + "}\n";
    }
    return out;
}

void DetectorConfig::validate() const {
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
        throw std::invalid_argument("score_threshold must be in [0,1]");
    }
}

BandedDetections filter_detections(std::span<const Detection> dets, const DetectorConfig& cfg,
                                   const MaskRaster* mask, std::optional<FrameSize> frame, double low_floor) {
    cfg.validate();
    if (mask && frame && (mask->width() != frame->width || mask->height() != frame->height)) {
        throw FilterError("mask is " + std::to_string(mask->width()) + "x" + std::to_string(mask->height()) +
                          " but frames are " + std::to_string(frame->width) + "x" +
                          std::to_string(frame->height));
    }
    BandedDetections out;
    for (const auto& d : dets) {
        if (!cfg.class_allowlist.contains(d.cls)) continue;
        if (mask) {
            const Point c = center(d.box);
            const int px = static_cast<int>(std::floor(c.x));
            const int py = static_cast<int>(std::floor(c.y));
            if (px >= 0 && py >= 0 && px < mask->width() && py < mask->height() && mask->excluded(px, py)) continue;
        }
        if (d.score >= cfg.score_threshold) {
            out.high.push_back(d);
        } else if (d.score >= low_floor) {
            out.low.push_back(d);
        }
    }
    return out;
}

}  // namespace aiv
