#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiv/counting.hpp"
#include "aiv/detection.hpp"
#include "aiv/tracker.hpp"

namespace aiv {

inline constexpr double kDefaultMatchIou = 0.5;

struct MatchPair {
    std::int64_t gt_id = 0;
    std::int64_t track_id = 0;
    VehicleClass cls = VehicleClass::Car;
    double iou = 0.0;

    friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct FrameMatching {
    std::int64_t frame = 0;
    std::vector<MatchPair> matches;          // ascending gt_id
    std::vector<std::int64_t> unmatched_gt;  // gt ids
    std::vector<std::int64_t> unmatched_pred;  // track ids

    friend bool operator==(const FrameMatching&, const FrameMatching&) = default;
};

/// Class-aware maximum-IoU one-to-one matching among pairs with
/// iou >= iou_min. All records must belong to `frame`.
FrameMatching match_frame(std::int64_t frame, std::span<const GTRecord> gt, std::span<const TrackOutput> preds,
                          double iou_min = kDefaultMatchIou);

std::optional<double> mota(std::int64_t fn, std::int64_t fp, std::int64_t ids, std::int64_t denom);
std::optional<double> motp(double sum_iou, std::int64_t matches);

/// Identity switches in frame order: a gt matched to a different track than
/// at its previous matched frame. Returns (frame, gt_id) per switch.
std::vector<std::pair<std::int64_t, std::int64_t>> id_switches(std::span<const FrameMatching> matchings);
std::int64_t count_ids(std::span<const FrameMatching> matchings);

struct PRF1 {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};
PRF1 prf1(std::int64_t tp, std::int64_t fp, std::int64_t fn);

struct FprFnr {
    double fpr = 0.0;
    double fnr = 0.0;
};
FprFnr fpr_fnr(std::int64_t fp, std::int64_t fn, std::int64_t detections_total, std::int64_t gt_total);

/// Percentage; may exceed 100 on over-count. Undefined when gt_count is 0.
std::optional<double> counting_accuracy(std::int64_t detected, std::int64_t gt_count);

struct FpsStats {
    std::vector<std::vector<double>> per_frame_fps;  // one series per run
    double avg_min_fps = 0.0;
    double avg_fps = 0.0;
    double avg_max_fps = 0.0;
    double fps_range = 0.0;

    nlohmann::json to_json() const;
};
class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};
/// Each run is a series of per-frame durations in seconds.
FpsStats fps_stats(std::span<const std::vector<double>> runs);

struct ClassMetrics {
    std::int64_t gt_total = 0;
    std::int64_t pred_total = 0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t ids = 0;
    std::int64_t matches = 0;
    double sum_iou = 0.0;
    std::optional<double> mota;         // denominator: GT instances
    std::optional<double> mota_compat;  // denominator: matches
    std::optional<double> motp;
    PRF1 prf;
    FprFnr rates;
    std::int64_t gt_vehicles = 0;  // distinct gt ids
    std::optional<std::int64_t> counted;
    std::optional<double> counting_accuracy_pct;

    nlohmann::json to_json() const;
};

struct EvalReport {
    std::map<VehicleClass, ClassMetrics> per_class;  // classes present in GT or predictions
    ClassMetrics overall;
    std::int64_t frames = 0;
    double iou_min = kDefaultMatchIou;
    std::optional<std::string> count_method;
    std::optional<FpsStats> fps;

    nlohmann::json to_json() const;
    /// Aligned text table; undefined ratios are left blank.
    std::string to_table() const;
};

struct EvalOptions {
    double iou_min = kDefaultMatchIou;
    const CountLedger* ledger = nullptr;
    std::optional<CountMethod> count_method;  // restricts ledger totals; all methods if unset
    bool parallel = true;
};

/// Evaluates a dense, frame-ordered prediction sequence against GT. GT
/// frames at or beyond predictions.size() are an error.
EvalReport evaluate(std::span<const FrameOutput> predictions, const GTStream& gt, const EvalOptions& options = {});

/// Per-frame matchings for a whole sequence. Frames are independent, so the
/// default implementation distributes them across threads.
std::vector<FrameMatching> match_sequence(std::span<const FrameOutput> predictions,
                                          std::span<const std::vector<GTRecord>> gt_by_frame, double iou_min);
namespace reference {
std::vector<FrameMatching> match_sequence(std::span<const FrameOutput> predictions,
                                          std::span<const std::vector<GTRecord>> gt_by_frame, double iou_min);
}

/// Half-up rounding to `digits` decimals, for display.
double round_half_up(double v, int digits);

}  // namespace aiv
