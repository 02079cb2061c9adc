#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aiv/appearance.hpp"
#include "aiv/raster.hpp"
#include "aiv/tracker.hpp"

namespace aiv {

using WallClock = std::chrono::system_clock;

struct TemplateRecord {
    std::string template_id;
    std::int64_t track_id = 0;
    VehicleClass cls = VehicleClass::Car;
    std::string crop;  // path relative to the gallery root; empty when anonymized
    Feature feature;   // unit norm
    std::int64_t frame = 0;  // first seen
    double score = 0.0;      // best registered detection score
    WallClock::time_point created_at;

    nlohmann::json to_json() const;
    static TemplateRecord from_json(const nlohmann::json& j);
};

struct GalleryConfig {
    int min_crop_px = 32;
    double min_score = 0.7;  // tracker score_high
    bool anonymize = false;  // features only, no crop files
};

struct Rejection {
    enum class Reason { TooSmall, LowScore, NotBetter };
    Reason reason;
    std::string message;
};

using RegisterResult = std::variant<TemplateRecord, Rejection>;

class GalleryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RetentionPolicy {
    std::optional<std::chrono::seconds> max_age;
    std::int64_t max_records = std::numeric_limits<std::int64_t>::max();
    bool anonymize = false;
};

struct PurgeReport {
    std::vector<std::string> removed;  // template ids
    std::int64_t anonymized = 0;
};

std::string template_id_for(std::int64_t track_id);
std::string format_time(WallClock::time_point t);
WallClock::time_point parse_time(const std::string& s);

/// Template store under `root`: <class>/<template_id>.png plus index.json.
/// Mutations are serialized; snapshot() hands out an immutable view for
/// concurrent verification.
class Gallery {
public:
    using Clock = std::function<WallClock::time_point()>;

    explicit Gallery(std::filesystem::path root, GalleryConfig config = {}, Clock clock = WallClock::now);

    /// Applies the quality gate, then stores or replaces the track's template.
    /// Throws GalleryError when no raster is available.
    RegisterResult register_template(const TrackOutput& track, std::int64_t frame, const Raster* raster,
                                     const Embedder& embed = appearance_embed);

    PurgeReport apply_retention(const RetentionPolicy& policy, WallClock::time_point now);

    std::shared_ptr<const std::vector<TemplateRecord>> snapshot() const;
    std::size_t size() const { return snapshot()->size(); }
    nlohmann::json index_json() const;
    const std::filesystem::path& root() const noexcept { return root_; }
    const GalleryConfig& config() const noexcept { return config_; }

private:
    void save_locked(const std::vector<TemplateRecord>& records);

    std::filesystem::path root_;
    GalleryConfig config_;
    Clock clock_;
    mutable std::mutex mu_;
    std::shared_ptr<const std::vector<TemplateRecord>> records_;
};

struct Match {
    std::string template_id;
    double similarity_pct = 0.0;
};
struct NoMatch {
    std::optional<double> best_similarity_pct;
};
struct TimedOut {};
using VerifyResult = std::variant<Match, NoMatch, TimedOut>;

using SteadyClock = std::function<std::chrono::steady_clock::time_point()>;

/// Best cosine similarity over the templates. A similarity >= similarity_min
/// is a match. The clock is polled before each comparison; once more than
/// `timeout` has elapsed the search stops with TimedOut.
VerifyResult verify(std::span<const float> query, std::span<const TemplateRecord> templates,
                    double similarity_min = 0.6, std::chrono::milliseconds timeout = std::chrono::seconds(5),
                    const SteadyClock& clock = std::chrono::steady_clock::now);

}  // namespace aiv
