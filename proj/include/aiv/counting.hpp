#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aiv/geom.hpp"
#include "aiv/tracker.hpp"

namespace aiv {

enum class CountMethod { FinishLine, MotionVector };

std::string_view method_name(CountMethod m) noexcept;
std::optional<CountMethod> method_from_name(std::string_view name) noexcept;

struct FinishLineZone {
    Polygon region;
    int dwell_frames = 5;
};

struct MotionVectorSpec {
    Point anchor;
    double direction_deg = 0.0;  // image axes: 0 = +x, 90 = +y (down)
    double distance = 0.0;
    double width = 0.0;

    void validate() const;
};

/// Zone/vector configuration; either or both methods may be present.
struct CountingConfig {
    std::optional<FinishLineZone> finish_line;
    std::optional<MotionVectorSpec> motion_vector;

    nlohmann::json to_json() const;
    static CountingConfig from_json(const nlohmann::json& j);
    /// Keeps only the named method.
    CountingConfig only(CountMethod m) const;
};

struct CountEvent {
    std::int64_t track_id = 0;
    VehicleClass cls = VehicleClass::Car;
    std::int64_t frame = 0;
    CountMethod method = CountMethod::FinishLine;

    friend bool operator==(const CountEvent&, const CountEvent&) = default;
};

class CountError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Append-only list of events; per-class totals are maintained alongside.
class CountLedger {
public:
    /// Throws CountError if (track_id, method) was already recorded.
    void record(const CountEvent& e);
    bool counted(std::int64_t track_id, CountMethod method) const;

    const std::vector<CountEvent>& events() const noexcept { return events_; }
    const std::map<VehicleClass, std::int64_t>& totals() const noexcept { return totals_; }
    std::int64_t total(VehicleClass c) const;
    std::int64_t total(VehicleClass c, CountMethod m) const;

    std::string to_csv() const;
    nlohmann::json to_json() const;
    static CountLedger from_json(const nlohmann::json& j);

    friend bool operator==(const CountLedger& a, const CountLedger& b) { return a.events_ == b.events_; }

private:
    std::vector<CountEvent> events_;
    std::map<VehicleClass, std::int64_t> totals_;
    std::set<std::pair<std::int64_t, int>> seen_;
};

/// Counts a track once it has kept its box center inside the region for
/// dwell_frames consecutive observed frames.
class FinishLineCounter {
public:
    explicit FinishLineCounter(FinishLineZone zone);
    void update(std::int64_t frame, std::span<const TrackOutput> active, CountLedger& ledger);
    const FinishLineZone& zone() const noexcept { return zone_; }

private:
    FinishLineZone zone_;
    std::unordered_map<std::int64_t, int> streak_;
};

/// Counts a track whose center, after entering the corridor, advances at
/// least `distance` along the direction without leaving the corridor's
/// lateral band.
class MotionVectorCounter {
public:
    explicit MotionVectorCounter(MotionVectorSpec spec);
    void update(std::int64_t frame, std::span<const TrackOutput> active, CountLedger& ledger);

    /// Corridor coordinates of a point: along-axis offset from the anchor and
    /// signed lateral offset.
    std::pair<double, double> axis_coords(Point p) const noexcept;

private:
    MotionVectorSpec spec_;
    Point dir_;
    Point normal_;
    std::unordered_map<std::int64_t, Point> entry_;
};

/// Runs every configured method over a frame-ordered stream of outputs.
class CountingEngine {
public:
    explicit CountingEngine(const CountingConfig& config);
    void consume(const FrameOutput& frame);
    const CountLedger& ledger() const noexcept { return ledger_; }

private:
    std::optional<FinishLineCounter> finish_;
    std::optional<MotionVectorCounter> vector_;
    CountLedger ledger_;
};

}  // namespace aiv
