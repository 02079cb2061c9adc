#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aiv/cache.hpp"
#include "aiv/counting.hpp"
#include "aiv/detector.hpp"
#include "aiv/frame_source.hpp"
#include "aiv/gallery.hpp"
#include "aiv/metrics.hpp"
#include "aiv/tracker.hpp"

namespace aiv {

enum class SessionState { Created, Running, Cached, Counting, Done, Failed };
std::string_view state_name(SessionState s) noexcept;
std::optional<SessionState> state_from_name(std::string_view s) noexcept;

/// Everything needed to rebuild a session's inputs. Persisted as config.json.
struct SessionSpec {
    std::string detections;              // .dets.jsonl; empty when an adapter produces detections
    std::optional<std::string> frames_dir;  // PNG/PPM frames; enables pixels
    std::optional<std::string> video;    // identity and adapter source; defaults to the detections file
    std::optional<AdapterSpec> adapter;
    std::optional<int> width;
    std::optional<int> height;
    std::optional<double> fps;
    std::optional<std::int64_t> frames;  // frame count override
    TrackerParams tracker;
    DetectorConfig detector;
    bool gallery = false;
    GalleryConfig gallery_config;

    nlohmann::json to_json() const;
    /// Throws ValidationError with field-level messages.
    static SessionSpec from_json(const nlohmann::json& j);
    /// The file that identifies the input (and carries the mask sidecar).
    std::filesystem::path identity_path() const;
};

/// Mask saved next to the input: <input minus extension>.mask.json.
std::filesystem::path mask_sidecar_path(const std::filesystem::path& input);

struct StatusEvent {
    std::uint64_t seq = 0;
    std::string session_id;
    std::int64_t timestamp_ms = 0;
    std::string level;  // info | warn | error
    std::string message;
    std::optional<std::int64_t> frame;
    std::optional<double> fps;

    nlohmann::json to_json() const;
};

/// Broadcast log of status events. Subscribers read by sequence number, so
/// any number of them can follow one session.
class StatusHub {
public:
    explicit StatusHub(std::string session_id) : session_id_(std::move(session_id)) {}
    StatusEvent publish(std::string level, std::string message, std::optional<std::int64_t> frame = {},
                        std::optional<double> fps = {});
    /// Events with seq > after; waits up to `wait` for one to arrive.
    std::vector<StatusEvent> since(std::uint64_t after, std::chrono::milliseconds wait = {}) const;
    void close();
    bool closed() const;

private:
    std::string session_id_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<StatusEvent> events_;
    std::int64_t last_ts_ = 0;
    bool closed_ = false;
};

class SessionError : public std::runtime_error {
public:
    enum class Kind { BadRequest, NotFound, Conflict, Unavailable };
    SessionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

enum class CountMode { Full, Quick };

struct LedgerEntry {
    int index = 0;
    std::string method;  // "finish_line", "motion_vector" or "all"
    std::string mode;    // "full" or "quick"
    CountingConfig zones;
    CountLedger ledger;

    nlohmann::json to_json() const;
};

/// One analysis session rooted at a directory:
///   config.json  mask.json  zones.json  cache.aiv  ledgers/  report.json  gallery/
class Session {
public:
    /// Validates the spec, creates the directory and loads a mask sidecar if
    /// one sits next to the input. Throws SessionError or ValidationError.
    static std::shared_ptr<Session> create(const std::filesystem::path& dir, const SessionSpec& spec);
    /// Reopens a session directory written by create().
    static std::shared_ptr<Session> open(const std::filesystem::path& dir);
    ~Session();

    const std::string& id() const noexcept { return id_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }
    const SessionSpec& spec() const noexcept { return spec_; }
    std::filesystem::path cache_path() const { return dir_ / "cache.aiv"; }

    SessionState state() const;
    std::optional<std::string> failure() const;
    nlohmann::json describe() const;
    StatusHub& events() noexcept { return hub_; }

    std::vector<Polygon> mask() const;
    /// Persists mask.json and the sidecar next to the input.
    void set_mask(std::vector<Polygon> polygons);
    std::optional<CountingConfig> zones() const;
    /// Returns false when the zones equal the stored ones (nothing written).
    bool set_zones(const CountingConfig& zones);

    /// Starts the pipeline on a worker thread. Returns false when a run is
    /// already in progress.
    bool start_run();
    /// Runs the pipeline on the calling thread. Throws on failure.
    void run_blocking();
    /// Blocks until no run is in progress.
    void wait() const;

    /// Counts with the stored zones (or `zones` when given), restricted to
    /// `method` if set. Quick mode needs a cache; Full re-runs the pipeline.
    LedgerEntry count(std::optional<CountMethod> method, CountMode mode,
                      const std::optional<CountingConfig>& zones = {});
    std::vector<LedgerEntry> ledgers() const;

    EvalReport evaluate(const std::filesystem::path& gt_path, bool with_fps = true);
    std::optional<nlohmann::json> report() const;

    std::unique_ptr<FrameSource> frame_source() const;
    Gallery* gallery() noexcept { return gallery_.get(); }
    std::string config_hash() const;

private:
    Session(std::filesystem::path dir, SessionSpec spec);
    void persist_locked() const;
    bool try_begin(SessionState next);
    void finish_run(std::optional<std::string> error);
    void execute_run(CountingEngine* engine);
    void require_cache() const;

    std::string id_;
    std::filesystem::path dir_;
    SessionSpec spec_;
    StatusHub hub_;
    std::unique_ptr<Gallery> gallery_;

    mutable std::mutex mu_;
    mutable std::condition_variable idle_cv_;
    SessionState state_ = SessionState::Created;
    std::optional<std::string> failure_;
    std::int64_t progress_ = 0;
    std::int64_t frame_total_ = 0;
    double last_fps_ = 0.0;
    std::vector<Polygon> mask_;
    std::optional<CountingConfig> zones_;
    std::vector<LedgerEntry> ledgers_;
    std::optional<nlohmann::json> report_;
    std::vector<double> live_frame_seconds_;
    bool busy_ = false;
    std::mutex worker_mu_;  // guards worker_ handle
    std::thread worker_;
};

/// Sessions under a data directory, one subdirectory each.
class SessionManager {
public:
    /// Reopens every session directory already present under `root`.
    explicit SessionManager(std::filesystem::path root);

    std::shared_ptr<Session> create(const SessionSpec& spec);
    /// Throws SessionError(NotFound).
    std::shared_ptr<Session> get(const std::string& id) const;
    std::vector<std::string> ids() const;
    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
};

/// Reads a JSON file; throws SessionError(BadRequest) naming the path.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace aiv
