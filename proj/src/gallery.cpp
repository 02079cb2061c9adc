#include "aiv/gallery.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace aiv {

namespace fs = std::filesystem;

std::string template_id_for(std::int64_t track_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "T%06" PRId64, track_id);
    return buf;
}

std::string format_time(WallClock::time_point t) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long rem = static_cast<long>(ms % 1000);
    if (rem < 0) {
        rem += 1000;
        secs -= 1;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    const std::size_t n = std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    std::snprintf(buf + n, sizeof(buf) - n, ".%03ldZ", rem);
    return buf;
}

WallClock::time_point parse_time(const std::string& s) {
    std::tm tm{};
    int ms = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d.%dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &ms) < 6) {
        throw GalleryError("bad timestamp: " + s);
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t secs = timegm(&tm);
    return WallClock::time_point(std::chrono::seconds(secs) + std::chrono::milliseconds(ms));
}

nlohmann::json TemplateRecord::to_json() const {
    return {{"template_id", template_id},
            {"track_id", track_id},
            {"cls", class_id(cls)},
            {"class", class_name(cls)},
            {"crop", crop},
            {"feature", feature},
            {"frame", frame},
            {"score", score},
            {"created_at", format_time(created_at)}};
}

TemplateRecord TemplateRecord::from_json(const nlohmann::json& j) {
    TemplateRecord r;
    try {
        r.template_id = j.at("template_id").get<std::string>();
        r.track_id = j.at("track_id").get<std::int64_t>();
        const auto cls = class_from_id(j.at("cls").get<int>());
        if (!cls) throw GalleryError("unknown class in gallery index");
        r.cls = *cls;
        r.crop = j.value("crop", "");
        r.feature = j.at("feature").get<Feature>();
        r.frame = j.at("frame").get<std::int64_t>();
        r.score = j.at("score").get<double>();
        r.created_at = parse_time(j.at("created_at").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw GalleryError(std::string("malformed gallery index entry: ") + e.what());
    }
    return r;
}

Gallery::Gallery(fs::path root, GalleryConfig config, Clock clock)
    : root_(std::move(root)), config_(config), clock_(std::move(clock)) {
    auto records = std::make_shared<std::vector<TemplateRecord>>();
    const fs::path index = root_ / "index.json";
    if (fs::exists(index)) {
        std::ifstream in(index);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("templates")) throw GalleryError("corrupt gallery index " + index.string());
        for (const auto& t : j.at("templates")) records->push_back(TemplateRecord::from_json(t));
    }
    records_ = std::move(records);
}

std::shared_ptr<const std::vector<TemplateRecord>> Gallery::snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
}

nlohmann::json Gallery::index_json() const {
    const auto snap = snapshot();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : *snap) arr.push_back(r.to_json());
    return {{"templates", std::move(arr)}};
}

void Gallery::save_locked(const std::vector<TemplateRecord>& records) {
    fs::create_directories(root_);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(r.to_json());
    const fs::path index = root_ / "index.json";
    const fs::path tmp = root_ / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << nlohmann::json{{"templates", std::move(arr)}}.dump(1) << '\n';
        if (!out) throw GalleryError("cannot write " + tmp.string());
    }
    fs::rename(tmp, index);
}

RegisterResult Gallery::register_template(const TrackOutput& track, std::int64_t frame, const Raster* raster,
                                          const Embedder& embed) {
    if (raster == nullptr || raster->width == 0) throw GalleryError("template registration needs frame pixels");
    const PixelRect rect = crop_rect(track.box, raster->width, raster->height);
    if (rect.width() < config_.min_crop_px || rect.height() < config_.min_crop_px) {
        return Rejection{Rejection::Reason::TooSmall, "crop " + std::to_string(rect.width()) + "x" +
                                                          std::to_string(rect.height()) + " is below minimum size " +
                                                          std::to_string(config_.min_crop_px)};
    }
    if (static_cast<double>(track.score) < config_.min_score) {
        return Rejection{Rejection::Reason::LowScore, "detection score below " + std::to_string(config_.min_score)};
    }

    std::lock_guard lock(mu_);
    auto next = std::make_shared<std::vector<TemplateRecord>>(*records_);
    auto it = std::find_if(next->begin(), next->end(), [&](const auto& r) { return r.track_id == track.track_id; });
    if (it != next->end() && static_cast<double>(track.score) <= it->score) {
        return Rejection{Rejection::Reason::NotBetter, "existing template has an equal or higher score"};
    }

    TemplateRecord rec;
    rec.template_id = template_id_for(track.track_id);
    rec.track_id = track.track_id;
    rec.cls = track.cls;
    rec.feature = embed(*raster, track.box);
    normalize(rec.feature);
    rec.frame = it != next->end() ? it->frame : frame;
    rec.score = static_cast<double>(track.score);
    rec.created_at = it != next->end() ? it->created_at : clock_();

    const fs::path rel = fs::path(class_name(track.cls)) / (rec.template_id + ".png");
    if (!config_.anonymize) {
        fs::create_directories(root_ / rel.parent_path());
        const fs::path tmp = root_ / (rel.string() + ".tmp");
        write_png(tmp.string(), crop(*raster, rect));
        fs::rename(tmp, root_ / rel);
        rec.crop = rel.generic_string();
    } else if (it != next->end() && !it->crop.empty()) {
        std::error_code ec;
        fs::remove(root_ / it->crop, ec);
    }

    if (it != next->end()) {
        *it = rec;
    } else {
        next->push_back(rec);
    }
    save_locked(*next);
    records_ = std::move(next);
    return rec;
}

PurgeReport Gallery::apply_retention(const RetentionPolicy& policy, WallClock::time_point now) {
    if (policy.max_records < 0) throw std::invalid_argument("max_records must be >= 0");
    std::lock_guard lock(mu_);
    std::vector<TemplateRecord> keep;
    PurgeReport report;
    std::vector<TemplateRecord> purge;
    for (const auto& r : *records_) {
        if (policy.max_age && now - r.created_at > *policy.max_age) {
            purge.push_back(r);
        } else {
            keep.push_back(r);
        }
    }
    if (static_cast<std::int64_t>(keep.size()) > policy.max_records) {
        std::stable_sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) {
            return a.created_at != b.created_at ? a.created_at < b.created_at : a.template_id < b.template_id;
        });
        const auto excess = static_cast<std::ptrdiff_t>(keep.size()) - static_cast<std::ptrdiff_t>(policy.max_records);
        purge.insert(purge.end(), keep.begin(), keep.begin() + excess);
        keep.erase(keep.begin(), keep.begin() + excess);
    }
    for (const auto& r : purge) {
        report.removed.push_back(r.template_id);
        if (!r.crop.empty()) {
            std::error_code ec;
            fs::remove(root_ / r.crop, ec);
        }
    }
    if (policy.anonymize) {
        for (auto& r : keep) {
            if (r.crop.empty()) continue;
            std::error_code ec;
            fs::remove(root_ / r.crop, ec);
            r.crop.clear();
            ++report.anonymized;
        }
    }
    if (!purge.empty() || report.anonymized > 0) {
        save_locked(keep);
        records_ = std::make_shared<const std::vector<TemplateRecord>>(std::move(keep));
    }
    return report;
}

VerifyResult verify(std::span<const float> query, std::span<const TemplateRecord> templates, double similarity_min,
                    std::chrono::milliseconds timeout, const SteadyClock& clock) {
    const auto start = clock();
    std::optional<double> best;
    const TemplateRecord* best_rec = nullptr;
    for (const auto& t : templates) {
        if (clock() - start > timeout) return TimedOut{};
        const double sim = 1.0 - cosine_distance(query, t.feature);
        if (!best || sim > *best) {
            best = sim;
            best_rec = &t;
        }
    }
    if (best && *best >= similarity_min) return Match{best_rec->template_id, 100.0 * *best};
    return NoMatch{best ? std::optional<double>(100.0 * *best) : std::nullopt};
}

}  // namespace aiv
