#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aiv/geom.hpp"

namespace aiv {

/// Stable ids used in every file format.
enum class VehicleClass : std::uint8_t {
    Car = 0,
    Bus = 1,
    Truck = 2,
    Motorcycle = 3,
    Bicycle = 4,
    Other = 255,
};

inline constexpr VehicleClass kAllClasses[] = {VehicleClass::Car,        VehicleClass::Bus,
                                               VehicleClass::Truck,      VehicleClass::Motorcycle,
                                               VehicleClass::Bicycle,    VehicleClass::Other};

std::optional<VehicleClass> class_from_id(int id) noexcept;
inline int class_id(VehicleClass c) noexcept { return static_cast<int>(c); }
std::string_view class_name(VehicleClass c) noexcept;
std::optional<VehicleClass> class_from_name(std::string_view name) noexcept;

struct Detection {
    std::int64_t frame = 0;
    VehicleClass cls = VehicleClass::Car;
    double score = 0.0;
    BBox box;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ground-truth annotation; same line format as detections plus "gt_id".
struct GTRecord {
    std::int64_t frame = 0;
    std::int64_t gt_id = 0;
    VehicleClass cls = VehicleClass::Car;
    BBox box;

    friend bool operator==(const GTRecord&, const GTRecord&) = default;
};

struct StreamHeader {
    int schema = 1;
    int width = 0;
    int height = 0;
    double fps = 0.0;

    friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct DetectionStream {
    std::optional<StreamHeader> header;
    std::vector<Detection> detections;  // sorted by frame, stable within a frame
};

struct GTStream {
    std::optional<StreamHeader> header;
    std::vector<GTRecord> records;  // sorted by frame
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Parses a `.dets.jsonl` stream. An optional first line carrying "schema"
/// is the header; when present its frame size is used to clip boxes.
DetectionStream parse_detection_stream(std::string_view text);
GTStream parse_gt_stream(std::string_view text);

DetectionStream read_detection_file(const std::string& path);
GTStream read_gt_file(const std::string& path);

/// Canonical serialization: header line (if any) then one record per line,
/// shortest round-trip number formatting.
std::string serialize_detection_stream(const DetectionStream& stream);
std::string serialize_gt_stream(const GTStream& stream);
std::string format_number(double v);

struct DetectorConfig {
    double score_threshold = 0.7;
    std::set<VehicleClass> class_allowlist{std::begin(kAllClasses), std::end(kAllClasses)};

    void validate() const;
    friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct FrameSize {
    int width = 0;
    int height = 0;
};

struct BandedDetections {
    std::vector<Detection> high;  // score >= threshold
    std::vector<Detection> low;   // low_floor <= score < threshold
};

class FilterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Drops detections outside the allowlist or whose box center lands on an
/// excluded mask pixel, then splits the rest into the high and low score
/// bands. Order is preserved within each band.
BandedDetections filter_detections(std::span<const Detection> dets, const DetectorConfig& cfg,
                                   const MaskRaster* mask = nullptr, std::optional<FrameSize> frame = {},
                                   double low_floor = 0.1);

/// Clips a box to [0,width)x[0,height). Returns nullopt when nothing remains.
std::optional<BBox> clip_box(const BBox& b, int width, int height) noexcept;

}  // namespace aiv
