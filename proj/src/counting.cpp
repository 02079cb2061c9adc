#include "aiv/counting.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace aiv {

std::string_view method_name(CountMethod m) noexcept {
    return m == CountMethod::FinishLine ? "finish_line" : "motion_vector";
}

std::optional<CountMethod> method_from_name(std::string_view name) noexcept {
    if (name == "finish_line") return CountMethod::FinishLine;
    if (name == "motion_vector") return CountMethod::MotionVector;
    return std::nullopt;
}

void MotionVectorSpec::validate() const {
    if (!(distance > 0.0)) throw std::invalid_argument("motion vector distance must be > 0");
    if (!(width > 0.0)) throw std::invalid_argument("motion vector width must be > 0");
    if (!std::isfinite(direction_deg) || !std::isfinite(anchor.x) || !std::isfinite(anchor.y)) {
        throw std::invalid_argument("motion vector must be finite");
    }
}

nlohmann::json CountingConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (finish_line) {
        j["finish_line"] = {{"region", polygon_to_json(finish_line->region)}, {"dwell", finish_line->dwell_frames}};
    }
    if (motion_vector) {
        j["motion_vector"] = {{"anchor", {motion_vector->anchor.x, motion_vector->anchor.y}},
                              {"direction_deg", motion_vector->direction_deg},
                              {"distance", motion_vector->distance},
                              {"width", motion_vector->width}};
    }
    return j;
}

CountingConfig CountingConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("zone config must be a JSON object");
    CountingConfig cfg;
    try {
        if (j.contains("finish_line")) {
            const auto& f = j.at("finish_line");
            FinishLineZone zone{polygon_from_json(f.at("region")), f.value("dwell", 5)};
            if (zone.dwell_frames < 1) throw std::invalid_argument("dwell must be >= 1");
            cfg.finish_line = std::move(zone);
        }
        if (j.contains("motion_vector")) {
            const auto& m = j.at("motion_vector");
            const auto& a = m.at("anchor");
            MotionVectorSpec spec{{a.at(0).get<double>(), a.at(1).get<double>()},
                                  m.at("direction_deg").get<double>(),
                                  m.at("distance").get<double>(),
                                  m.at("width").get<double>()};
            spec.validate();
            cfg.motion_vector = spec;
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed zone config: ") + e.what());
    }
    if (!cfg.finish_line && !cfg.motion_vector) {
        throw std::invalid_argument("zone config needs finish_line and/or motion_vector");
    }
    return cfg;
}

CountingConfig CountingConfig::only(CountMethod m) const {
    CountingConfig out;
    if (m == CountMethod::FinishLine) {
        out.finish_line = finish_line;
    } else {
        out.motion_vector = motion_vector;
    }
    return out;
}

void CountLedger::record(const CountEvent& e) {
    if (!seen_.emplace(e.track_id, static_cast<int>(e.method)).second) {
        throw CountError("track " + std::to_string(e.track_id) + " already counted by " +
                         std::string(method_name(e.method)));
    }
    events_.push_back(e);
    totals_[e.cls] += 1;
}

bool CountLedger::counted(std::int64_t track_id, CountMethod method) const {
    return seen_.contains({track_id, static_cast<int>(method)});
}

std::int64_t CountLedger::total(VehicleClass c) const {
    const auto it = totals_.find(c);
    return it == totals_.end() ? 0 : it->second;
}

std::int64_t CountLedger::total(VehicleClass c, CountMethod m) const {
    std::int64_t n = 0;
    for (const auto& e : events_) n += (e.cls == c && e.method == m) ? 1 : 0;
    return n;
}

std::string CountLedger::to_csv() const {
    std::ostringstream out;
    out << "track_id,class,frame,method\n";
    for (const auto& e : events_) {
        out << e.track_id << ',' << class_name(e.cls) << ',' << e.frame << ',' << method_name(e.method) << '\n';
    }
    return out.str();
}

nlohmann::json CountLedger::to_json() const {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : events_) {
        events.push_back({{"track_id", e.track_id},
                          {"class", class_name(e.cls)},
                          {"frame", e.frame},
                          {"method", method_name(e.method)}});
    }
    nlohmann::json totals = nlohmann::json::object();
    for (const auto& [cls, n] : totals_) totals[std::string(class_name(cls))] = n;
    return {{"events", std::move(events)}, {"totals", std::move(totals)}};
}

CountLedger CountLedger::from_json(const nlohmann::json& j) {
    CountLedger ledger;
    for (const auto& e : j.at("events")) {
        const auto cls = class_from_name(e.at("class").get<std::string>());
        const auto method = method_from_name(e.at("method").get<std::string>());
        if (!cls || !method) throw std::invalid_argument("malformed ledger event");
        ledger.record({e.at("track_id").get<std::int64_t>(), *cls, e.at("frame").get<std::int64_t>(), *method});
    }
    return ledger;
}

FinishLineCounter::FinishLineCounter(FinishLineZone zone) : zone_(std::move(zone)) {
    if (zone_.dwell_frames < 1) throw std::invalid_argument("dwell must be >= 1");
}

void FinishLineCounter::update(std::int64_t frame, std::span<const TrackOutput> active, CountLedger& ledger) {
    for (const auto& t : active) {
        if (ledger.counted(t.track_id, CountMethod::FinishLine)) continue;
        int& streak = streak_[t.track_id];
        if (!point_in_polygon(center(t.box), zone_.region)) {
            streak = 0;
            continue;
        }
        if (++streak >= zone_.dwell_frames) {
            ledger.record({t.track_id, t.cls, frame, CountMethod::FinishLine});
            streak_.erase(t.track_id);
        }
    }
}

MotionVectorCounter::MotionVectorCounter(MotionVectorSpec spec) : spec_(spec) {
    spec_.validate();
    const double rad = spec_.direction_deg * std::numbers::pi / 180.0;
    dir_ = {std::cos(rad), std::sin(rad)};
    normal_ = {-dir_.y, dir_.x};
}

std::pair<double, double> MotionVectorCounter::axis_coords(Point p) const noexcept {
    const double dx = p.x - spec_.anchor.x;
    const double dy = p.y - spec_.anchor.y;
    return {dx * dir_.x + dy * dir_.y, dx * normal_.x + dy * normal_.y};
}

void MotionVectorCounter::update(std::int64_t frame, std::span<const TrackOutput> active, CountLedger& ledger) {
    const double half = spec_.width / 2.0;
    for (const auto& t : active) {
        if (ledger.counted(t.track_id, CountMethod::MotionVector)) continue;
        const Point c = center(t.box);
        const auto [along, lateral] = axis_coords(c);
        const bool in_band = along >= 0.0 && std::abs(lateral) <= half;
        const auto it = entry_.find(t.track_id);
        if (it == entry_.end()) {
            if (in_band && along <= spec_.distance) entry_.emplace(t.track_id, c);
            continue;
        }
        if (!in_band) {
            entry_.erase(it);
            continue;
        }
        const double advanced = (c.x - it->second.x) * dir_.x + (c.y - it->second.y) * dir_.y;
        if (advanced >= spec_.distance) {
            ledger.record({t.track_id, t.cls, frame, CountMethod::MotionVector});
            entry_.erase(it);
        }
    }
}

CountingEngine::CountingEngine(const CountingConfig& config) {
    if (config.finish_line) finish_.emplace(*config.finish_line);
    if (config.motion_vector) vector_.emplace(*config.motion_vector);
}

void CountingEngine::consume(const FrameOutput& frame) {
    if (finish_) finish_->update(frame.frame, frame.tracks, ledger_);
    if (vector_) vector_->update(frame.frame, frame.tracks, ledger_);
}

}  // namespace aiv
