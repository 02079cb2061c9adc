#include "aiv/tracker.hpp"

#include <algorithm>
#include <tuple>

#include "aiv/assignment.hpp"
#include "aiv/kernels.hpp"

namespace aiv {

namespace {

// Exponential moving average weight kept on the existing track feature.
constexpr float kAppearanceMomentum = 0.9F;

std::string join_errors(const std::vector<FieldError>& errors) {
    std::string s = "invalid parameters:";
    for (const auto& e : errors) s += " " + e.field + ": " + e.message + ";";
    return s;
}

}  // namespace

std::string_view status_name(TrackStatus s) noexcept {
    switch (s) {
        case TrackStatus::Tentative: return "tentative";
        case TrackStatus::Active: return "active";
        case TrackStatus::Lost: return "lost";
        case TrackStatus::Removed: return "removed";
    }
    return "removed";
}

ValidationError::ValidationError(std::vector<FieldError> errors)
    : std::invalid_argument(join_errors(errors)), errors_(std::move(errors)) {}

std::vector<FieldError> TrackerParams::check() const {
    std::vector<FieldError> errs;
    auto unit = [&](const char* name, double v) {
        if (!(v >= 0.0 && v <= 1.0)) errs.push_back({name, "must be in [0,1]"});
    };
    unit("iou_threshold", iou_threshold);
    unit("score_high", score_high);
    unit("score_low", score_low);
    unit("cosine_distance_max", cosine_distance_max);
    if (!(score_low < score_high)) errs.push_back({"score_low", "must be below score_high"});
    if (min_hits_to_activate < 1) errs.push_back({"min_hits", "must be >= 1"});
    if (max_time_lost < 0) errs.push_back({"max_time_lost", "must be >= 0"});
    return errs;
}

void TrackerParams::validate() const {
    auto errs = check();
    if (!errs.empty()) throw ValidationError(std::move(errs));
}

nlohmann::json TrackerParams::to_json() const {
    return {{"iou_threshold", iou_threshold},
            {"score_high", score_high},
            {"score_low", score_low},
            {"cosine_distance_max", cosine_distance_max},
            {"min_hits", min_hits_to_activate},
            {"max_time_lost", max_time_lost},
            {"appearance", appearance_enabled}};
}

TrackerParams TrackerParams::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError(std::vector<FieldError>{{"params", "must be a JSON object"}});
    TrackerParams p;
    std::vector<FieldError> errs;
    auto number = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) {
            errs.push_back({key, "must be a number"});
            return;
        }
        out = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number_integer()) {
            errs.push_back({key, "must be an integer"});
            return;
        }
        out = j.at(key).get<int>();
    };
    number("iou_threshold", p.iou_threshold);
    number("score_high", p.score_high);
    number("score_low", p.score_low);
    number("cosine_distance_max", p.cosine_distance_max);
    integer("min_hits", p.min_hits_to_activate);
    integer("max_time_lost", p.max_time_lost);
    if (j.contains("appearance")) {
        if (j.at("appearance").is_boolean()) {
            p.appearance_enabled = j.at("appearance").get<bool>();
        } else {
            errs.push_back({"appearance", "must be a boolean"});
        }
    }
    static const std::set<std::string> known = {"iou_threshold", "score_high",   "score_low",  "cosine_distance_max",
                                                "min_hits",      "max_time_lost", "appearance"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) errs.push_back({key, "unknown parameter"});
    }
    if (errs.empty()) errs = p.check();
    if (!errs.empty()) throw ValidationError(std::move(errs));
    return p;
}

void sort_detections(std::vector<Detection>& dets) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return std::tuple(-a.score, class_id(a.cls), a.box.x, a.box.y, a.box.w, a.box.h) <
               std::tuple(-b.score, class_id(b.cls), b.box.x, b.box.y, b.box.w, b.box.h);
    });
}

TrackOutput make_output(std::int64_t id, VehicleClass cls, const BBox& box, double score) noexcept {
    const auto f = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    return {id, cls, BBox{f(box.x), f(box.y), f(box.w), f(box.h)}, static_cast<float>(score)};
}

Tracker::Tracker(TrackerParams params, Embedder embedder) : params_(params), embedder_(std::move(embedder)) {
    params_.validate();
}

void Tracker::advance(Track& t, std::int64_t frames) {
    for (std::int64_t i = 0; i < frames; ++i) t.state = kalman::predict(t.state);
    t.age += static_cast<int>(frames);
    t.time_since_update += static_cast<int>(frames);
}

void Tracker::apply_match(Track& t, const Candidate& c, std::int64_t frame, bool refresh_appearance) {
    t.state = kalman::update(t.state, c.det.box);
    t.time_since_update = 0;
    t.hits += 1;
    t.score = c.det.score;
    t.class_votes[c.det.cls] += c.det.score;
    t.cls = std::max_element(t.class_votes.begin(), t.class_votes.end(), [](const auto& a, const auto& b) {
                return a.second < b.second;
            })->first;
    t.history.emplace_back(frame, t.state.box());
    if (refresh_appearance && c.feature) {
        if (t.appearance) {
            for (std::size_t i = 0; i < t.appearance->size(); ++i) {
                (*t.appearance)[i] = kAppearanceMomentum * (*t.appearance)[i] +
                                     (1.0F - kAppearanceMomentum) * (*c.feature)[i];
            }
            normalize(*t.appearance);
        } else {
            t.appearance = c.feature;
        }
    }
}

Matrix Tracker::association_cost(std::span<Track* const> tracks, std::span<const Candidate* const> dets,
                                 bool use_appearance, std::vector<std::uint8_t>& feasible) const {
    std::vector<BBox> track_boxes, det_boxes;
    track_boxes.reserve(tracks.size());
    det_boxes.reserve(dets.size());
    for (const auto* t : tracks) track_boxes.push_back(t->state.box());
    for (const auto* d : dets) det_boxes.push_back(d->det.box);

    Matrix cost = kernels::iou_matrix(track_boxes, det_boxes);
    feasible.assign(cost.rows * cost.cols, 0);
    for (std::size_t r = 0; r < cost.rows; ++r) {
        for (std::size_t c = 0; c < cost.cols; ++c) {
            const double overlap = cost(r, c);
            double value = 1.0 - overlap;
            bool ok = overlap >= params_.iou_threshold;
            if (use_appearance && ok) {
                const auto& tf = tracks[r]->appearance;
                const auto& df = dets[c]->feature;
                if (tf && df) {
                    const double d = cosine_distance(*tf, *df);
                    ok = d <= params_.cosine_distance_max;
                    value = std::min(value, d);
                }
            }
            cost(r, c) = value;
            feasible[r * cost.cols + c] = ok ? 1 : 0;
        }
    }
    return cost;
}

FrameOutput Tracker::step(std::int64_t frame, std::span<const Detection> high, std::span<const Detection> low,
                          const Raster* raster) {
    if (last_frame_ && frame <= *last_frame_) {
        throw TrackerError("frame index regression: " + std::to_string(frame) + " after " +
                           std::to_string(*last_frame_));
    }
    if (params_.appearance_enabled && raster == nullptr) {
        throw TrackerError("appearance matching requires the frame raster");
    }
    const std::int64_t elapsed = last_frame_ ? frame - *last_frame_ : 1;
    last_frame_ = frame;

    std::vector<Detection> high_sorted(high.begin(), high.end());
    std::vector<Detection> low_sorted(low.begin(), low.end());
    sort_detections(high_sorted);
    sort_detections(low_sorted);

    std::vector<Candidate> high_c, low_c;
    for (auto& d : high_sorted) {
        Candidate c{d, std::nullopt};
        if (params_.appearance_enabled) c.feature = embedder_(*raster, d.box);
        high_c.push_back(std::move(c));
    }
    for (auto& d : low_sorted) low_c.push_back({d, std::nullopt});

    for (auto& t : tracks_) advance(t, elapsed);

    std::vector<char> high_used(high_c.size(), 0);
    std::vector<char> track_matched(tracks_.size(), 0);

    auto associate = [&](std::vector<std::size_t> track_idx, std::vector<Candidate>& cands,
                         std::vector<char>& used, bool use_appearance) {
        std::vector<Track*> ts;
        for (auto i : track_idx) ts.push_back(&tracks_[i]);
        std::vector<const Candidate*> ds;
        std::vector<std::size_t> det_idx;
        for (std::size_t k = 0; k < cands.size(); ++k) {
            if (!used[k]) {
                ds.push_back(&cands[k]);
                det_idx.push_back(k);
            }
        }
        if (ts.empty() || ds.empty()) return;
        std::vector<std::uint8_t> feasible;
        const Matrix cost = association_cost(ts, ds, use_appearance, feasible);
        const auto result = solve_assignment(cost, feasible);
        for (const auto& [r, c] : result.matches) {
            const std::size_t ti = track_idx[r];
            const std::size_t di = det_idx[c];
            Track& t = tracks_[ti];
            apply_match(t, cands[di], frame, use_appearance);
            used[di] = 1;
            track_matched[ti] = 1;
        }
    };

    // Stage 1: confirmed and lost tracks against the high band.
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (tracks_[i].status == TrackStatus::Active || tracks_[i].status == TrackStatus::Lost) pool.push_back(i);
    }
    associate(pool, high_c, high_used, params_.appearance_enabled);
    for (auto i : pool) {
        if (track_matched[i]) tracks_[i].status = TrackStatus::Active;
    }

    // Stage 2: still-unmatched Active tracks against the low band, IoU only.
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (tracks_[i].status == TrackStatus::Active && !track_matched[i]) remaining.push_back(i);
    }
    std::vector<char> low_used(low_c.size(), 0);
    associate(remaining, low_c, low_used, false);

    // Stage 3: tentative tracks against the leftover high band.
    std::vector<std::size_t> tentative;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (tracks_[i].status == TrackStatus::Tentative) tentative.push_back(i);
    }
    associate(tentative, high_c, high_used, params_.appearance_enabled);

    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        Track& t = tracks_[i];
        if (track_matched[i]) {
            if (t.status == TrackStatus::Tentative && t.hits >= params_.min_hits_to_activate) {
                t.status = TrackStatus::Active;
            }
            continue;
        }
        switch (t.status) {
            case TrackStatus::Tentative: t.status = TrackStatus::Removed; break;
            case TrackStatus::Active: t.status = TrackStatus::Lost; [[fallthrough]];
            case TrackStatus::Lost:
                if (t.time_since_update > params_.max_time_lost) t.status = TrackStatus::Removed;
                break;
            case TrackStatus::Removed: break;
        }
    }
    for (const auto& t : tracks_) {
        if (t.status == TrackStatus::Removed) removed_.insert(t.id);
    }
    std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Removed; });

    // Births from unmatched high-band detections.
    for (std::size_t k = 0; k < high_c.size(); ++k) {
        if (high_used[k] || high_c[k].det.score < params_.score_high) continue;
        Track t;
        t.id = next_id_++;
        t.cls = high_c[k].det.cls;
        t.state = kalman::initiate(high_c[k].det.box);
        t.status = params_.min_hits_to_activate <= 1 ? TrackStatus::Active : TrackStatus::Tentative;
        t.hits = 1;
        t.score = high_c[k].det.score;
        t.class_votes[t.cls] = t.score;
        t.history.emplace_back(frame, t.state.box());
        t.appearance = high_c[k].feature;
        tracks_.push_back(std::move(t));
    }

    FrameOutput out{frame, {}};
    for (const auto& t : tracks_) {
        if (t.status == TrackStatus::Active) out.tracks.push_back(make_output(t.id, t.cls, t.state.box(), t.score));
    }
    return out;
}

}  // namespace aiv
