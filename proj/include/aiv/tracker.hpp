#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aiv/appearance.hpp"
#include "aiv/detection.hpp"
#include "aiv/kalman.hpp"
#include "aiv/kernels.hpp"

namespace aiv {

enum class TrackStatus { Tentative, Active, Lost, Removed };

std::string_view status_name(TrackStatus s) noexcept;

struct Track {
    std::int64_t id = 0;
    VehicleClass cls = VehicleClass::Car;
    KalmanState state;
    TrackStatus status = TrackStatus::Tentative;
    int age = 0;                // frames since birth
    int time_since_update = 0;  // frames since the last matched detection
    int hits = 0;
    double score = 0.0;         // score of the last matched detection
    std::vector<std::pair<std::int64_t, BBox>> history;
    std::optional<Feature> appearance;
    std::map<VehicleClass, double> class_votes;
};

/// One identity as reported for a frame. Box and score are stored at f32
/// precision so that they survive the cache format unchanged.
struct TrackOutput {
    std::int64_t track_id = 0;
    VehicleClass cls = VehicleClass::Car;
    BBox box;
    float score = 0.0F;

    friend bool operator==(const TrackOutput&, const TrackOutput&) = default;
};

struct FrameOutput {
    std::int64_t frame = 0;
    std::vector<TrackOutput> tracks;  // ascending track_id

    friend bool operator==(const FrameOutput&, const FrameOutput&) = default;
};

struct FieldError {
    std::string field;
    std::string message;
};

class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<FieldError> errors);
    const std::vector<FieldError>& errors() const noexcept { return errors_; }

private:
    std::vector<FieldError> errors_;
};

struct TrackerParams {
    double iou_threshold = 0.45;
    double score_high = 0.7;
    double score_low = 0.1;
    double cosine_distance_max = 0.4;
    int min_hits_to_activate = 3;
    int max_time_lost = 30;
    bool appearance_enabled = false;  // false: ByteTrack, true: BoT-SORT-lite

    std::vector<FieldError> check() const;
    void validate() const;  // throws ValidationError

    /// Keys: iou_threshold, score_high, score_low, cosine_distance_max,
    /// min_hits, max_time_lost, appearance.
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static TrackerParams from_json(const nlohmann::json& j);

    friend bool operator==(const TrackerParams&, const TrackerParams&) = default;
};

class TrackerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sequential multi-object tracker. Two-stage association: high-score
/// detections against Active and Lost tracks, then low-score detections
/// against the Active tracks left over. Optional appearance fusion.
class Tracker {
public:
    explicit Tracker(TrackerParams params, Embedder embedder = appearance_embed);

    /// Frames must be strictly increasing. `frame` is required when
    /// appearance is enabled.
    FrameOutput step(std::int64_t frame, std::span<const Detection> high, std::span<const Detection> low,
                     const Raster* raster = nullptr);

    const TrackerParams& params() const noexcept { return params_; }
    /// Live (non-removed) tracks, ascending id.
    const std::vector<Track>& tracks() const noexcept { return tracks_; }
    const std::set<std::int64_t>& removed_ids() const noexcept { return removed_; }

private:
    struct Candidate {
        Detection det;
        std::optional<Feature> feature;
    };

    void advance(Track& t, std::int64_t frames);
    void apply_match(Track& t, const Candidate& c, std::int64_t frame, bool refresh_appearance);
    Matrix association_cost(std::span<Track* const> tracks, std::span<const Candidate* const> dets,
                            bool use_appearance, std::vector<std::uint8_t>& feasible) const;

    TrackerParams params_;
    Embedder embedder_;
    std::vector<Track> tracks_;
    std::set<std::int64_t> removed_;
    std::int64_t next_id_ = 1;
    std::optional<std::int64_t> last_frame_;
};

/// Deterministic within-frame order: score descending, then class, box.
void sort_detections(std::vector<Detection>& dets);

TrackOutput make_output(std::int64_t id, VehicleClass cls, const BBox& box, double score) noexcept;

}  // namespace aiv
