#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiv/detection.hpp"
#include "aiv/digest.hpp"
#include "aiv/tracker.hpp"

namespace aiv {

inline constexpr int kCacheSchemaVersion = 1;
inline constexpr char kCacheMagic[4] = {'A', 'I', 'V', '1'};

/// Digest of the canonical serialization of both configurations.
std::string config_hash(const TrackerParams& tracker, const DetectorConfig& detector);
nlohmann::json detector_config_to_json(const DetectorConfig& cfg);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

struct CacheHeader {
    int schema_version = kCacheSchemaVersion;
    FileIdentity video;
    int width = 0;
    int height = 0;
    std::int64_t frame_count = 0;
    double nominal_fps = 0.0;
    std::string config_hash;
    std::string created_at;  // ISO-8601 UTC
    nlohmann::json config;   // tracker + detector configuration the hash was taken over

    nlohmann::json to_json() const;
    static CacheHeader from_json(const nlohmann::json& j);

    friend bool operator==(const CacheHeader&, const CacheHeader&) = default;
};

using CacheRecord = FrameOutput;

class CacheError : public std::runtime_error {
public:
    explicit CacheError(const std::string& what, std::int64_t last_valid_frame = -1)
        : std::runtime_error(what), last_valid_frame_(last_valid_frame) {}
    /// Index of the last fully readable record, -1 if none.
    std::int64_t last_valid_frame() const noexcept { return last_valid_frame_; }

private:
    std::int64_t last_valid_frame_;
};

class ConfigMismatchError : public CacheError {
public:
    using CacheError::CacheError;
};

std::string utc_timestamp();

/// Streams records into `<path>.tmp` and renames on commit. A writer that
/// is destroyed without committing removes its temporary file.
class CacheWriter {
public:
    CacheWriter(std::filesystem::path path, CacheHeader header);
    ~CacheWriter();
    CacheWriter(const CacheWriter&) = delete;
    CacheWriter& operator=(const CacheWriter&) = delete;

    /// Records must arrive with dense frame indices starting at 0.
    void append(const CacheRecord& record);
    /// Writes the offset table and trailer, then publishes the file.
    /// Returns the final size in bytes.
    std::uint64_t commit();

    std::int64_t records_written() const noexcept { return static_cast<std::int64_t>(offsets_.size()); }

private:
    void write_bytes(const std::string& bytes);
    void abandon() noexcept;

    std::filesystem::path path_;
    std::filesystem::path tmp_path_;
    CacheHeader header_;
    std::ofstream out_;
    std::uint64_t position_ = 0;
    std::vector<std::uint64_t> offsets_;
    bool committed_ = false;
};

std::uint64_t write_cache(const std::filesystem::path& path, const CacheHeader& header,
                          std::span<const CacheRecord> records);

class CacheReader {
public:
    /// Validates the header line. Records are read lazily.
    explicit CacheReader(const std::filesystem::path& path);

    const CacheHeader& header() const noexcept { return header_; }
    /// True when the offset table trailer is present and consistent.
    bool indexed() const noexcept { return indexed_; }

    /// Next record in order, nullopt after the last. Throws CacheError
    /// (carrying the last valid frame) on truncation or corruption.
    std::optional<CacheRecord> next();
    void rewind();
    /// Random access through the offset table.
    CacheRecord read_frame(std::int64_t index);

    bool config_matches(const std::string& hash) const noexcept { return header_.config_hash == hash; }
    /// Non-fatal: a message when the file at `video_path` no longer matches
    /// the identity recorded in the header.
    std::optional<std::string> video_warning(const std::filesystem::path& video_path) const;

private:
    CacheRecord read_record_at(std::uint64_t offset, std::uint64_t* next_offset);

    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t file_size_ = 0;
    std::uint64_t records_begin_ = 0;
    std::uint64_t records_end_ = 0;
    std::vector<std::uint64_t> offsets_;
    CacheHeader header_;
    bool indexed_ = false;
    std::uint64_t cursor_ = 0;
    std::int64_t next_frame_ = 0;
};

std::vector<CacheRecord> read_all_records(CacheReader& reader);

// ---- replay ---------------------------------------------------------------

class ReplaySink {
public:
    virtual ~ReplaySink() = default;
    virtual void on_frame(const CacheRecord& record) = 0;
};

struct Pacing {
    std::optional<double> fps;  // nullopt: as fast as possible

    static Pacing as_fast() { return {}; }
    static Pacing real_time(double fps) { return {fps}; }
};

class ReplayError : public std::runtime_error {
public:
    ReplayError(std::int64_t frame, const std::string& what)
        : std::runtime_error("replay aborted at frame " + std::to_string(frame) + ": " + what), frame_(frame) {}
    std::int64_t frame() const noexcept { return frame_; }

private:
    std::int64_t frame_;
};

struct ReplayStats {
    std::int64_t frames = 0;
    double seconds = 0.0;
    std::vector<double> frame_seconds;  // per-frame delivery time
};

/// Feeds every record to every sink in order. RealTime pacing delivers
/// frame i no earlier than start + i/fps and returns no earlier than
/// start + frames/fps.
ReplayStats replay(CacheReader& reader, std::span<ReplaySink* const> sinks, Pacing pacing);

}  // namespace aiv
