#include "aiv/cache.hpp"

#include <cstring>
#include <ctime>
#include <limits>
#include <thread>

namespace aiv {

namespace {

constexpr std::size_t kTrackBytes = 4 + 1 + 4 * 4 + 4;
constexpr std::size_t kRecordFixedBytes = 4 + 2;
constexpr std::size_t kTrailerBytes = 8 + 4;

void put_u16(std::string& s, std::uint16_t v) {
    s += static_cast<char>(v & 0xFF);
    s += static_cast<char>((v >> 8) & 0xFF);
}
void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s += static_cast<char>((v >> (8 * i)) & 0xFF);
}
void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s += static_cast<char>((v >> (8 * i)) & 0xFF);
}
void put_f32(std::string& s, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32(s, bits);
}

std::uint64_t get_le(const unsigned char* p, int n) {
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
float get_f32(const unsigned char* p) {
    const auto bits = static_cast<std::uint32_t>(get_le(p, 4));
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

std::string encode_record(const CacheRecord& r) {
    if (r.frame < 0 || r.frame > std::numeric_limits<std::uint32_t>::max()) {
        throw CacheError("frame index does not fit the cache format");
    }
    if (r.tracks.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw CacheError("too many tracks in frame " + std::to_string(r.frame));
    }
    std::string payload;
    payload.reserve(kRecordFixedBytes + r.tracks.size() * kTrackBytes);
    put_u32(payload, static_cast<std::uint32_t>(r.frame));
    put_u16(payload, static_cast<std::uint16_t>(r.tracks.size()));
    for (const auto& t : r.tracks) {
        if (t.track_id < 0 || t.track_id > std::numeric_limits<std::uint32_t>::max()) {
            throw CacheError("track id does not fit the cache format");
        }
        put_u32(payload, static_cast<std::uint32_t>(t.track_id));
        payload += static_cast<char>(static_cast<std::uint8_t>(t.cls));
        put_f32(payload, static_cast<float>(t.box.x));
        put_f32(payload, static_cast<float>(t.box.y));
        put_f32(payload, static_cast<float>(t.box.w));
        put_f32(payload, static_cast<float>(t.box.h));
        put_f32(payload, t.score);
    }
    std::string out;
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    return out + payload;
}

}  // namespace

nlohmann::json detector_config_to_json(const DetectorConfig& cfg) {
    nlohmann::json classes = nlohmann::json::array();
    for (auto c : cfg.class_allowlist) classes.push_back(class_id(c));  // std::set: ascending ids
    return {{"score_threshold", cfg.score_threshold}, {"class_allowlist", std::move(classes)}};
}

DetectorConfig detector_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError(std::vector<FieldError>{{"detector", "must be a JSON object"}});
    DetectorConfig cfg;
    std::vector<FieldError> errs;
    for (const auto& [key, value] : j.items()) {
        if (key == "score_threshold") {
            if (!value.is_number()) {
                errs.push_back({"detector.score_threshold", "must be a number"});
            } else {
                cfg.score_threshold = value.get<double>();
                if (!(cfg.score_threshold >= 0.0 && cfg.score_threshold <= 1.0)) {
                    errs.push_back({"detector.score_threshold", "must be in [0,1]"});
                }
            }
        } else if (key == "class_allowlist") {
            cfg.class_allowlist.clear();
            if (!value.is_array()) {
                errs.push_back({"detector.class_allowlist", "must be a list of class ids"});
                continue;
            }
            for (const auto& id : value) {
                const auto cls = id.is_number_integer() ? class_from_id(id.get<int>()) : std::nullopt;
                if (!cls) {
                    errs.push_back({"detector.class_allowlist", "unknown class id " + id.dump()});
                } else {
                    cfg.class_allowlist.insert(*cls);
                }
            }
        } else {
            errs.push_back({"detector." + key, "unknown parameter"});
        }
    }
    if (!errs.empty()) throw ValidationError(std::move(errs));
    return cfg;
}

std::string config_hash(const TrackerParams& tracker, const DetectorConfig& detector) {
    const nlohmann::json j = {{"tracker", tracker.to_json()}, {"detector", detector_config_to_json(detector)}};
    return sha256_hex(canonical_json(j));
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json CacheHeader::to_json() const {
    return {{"schema", schema_version},
            {"video", {{"path", video.path}, {"digest", video.digest}, {"bytes", video.bytes}}},
            {"width", width},
            {"height", height},
            {"frame_count", frame_count},
            {"fps", nominal_fps},
            {"config_hash", config_hash},
            {"created_at", created_at},
            {"config", config}};
}

CacheHeader CacheHeader::from_json(const nlohmann::json& j) {
    CacheHeader h;
    try {
        h.schema_version = j.at("schema").get<int>();
        if (h.schema_version != kCacheSchemaVersion) {
            throw CacheError("unsupported cache schema version " + std::to_string(h.schema_version));
        }
        const auto& v = j.at("video");
        h.video = {v.at("path").get<std::string>(), v.at("digest").get<std::string>(),
                   v.at("bytes").get<std::uint64_t>()};
        h.width = j.at("width").get<int>();
        h.height = j.at("height").get<int>();
        h.frame_count = j.at("frame_count").get<std::int64_t>();
        h.nominal_fps = j.at("fps").get<double>();
        h.config_hash = j.at("config_hash").get<std::string>();
        h.created_at = j.at("created_at").get<std::string>();
        h.config = j.value("config", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw CacheError(std::string("invalid cache header: ") + e.what());
    }
    if (h.video.digest.empty() || h.config_hash.empty()) throw CacheError("cache header lacks digests");
    if (h.frame_count < 0) throw CacheError("negative frame count in cache header");
    return h;
}

// ---- writer ---------------------------------------------------------------

CacheWriter::CacheWriter(std::filesystem::path path, CacheHeader header)
    : path_(std::move(path)), tmp_path_(path_.string() + ".tmp"), header_(std::move(header)) {
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw CacheError("cannot create " + tmp_path_.string());
    write_bytes(header_.to_json().dump() + "\n");
}

CacheWriter::~CacheWriter() {
    if (!committed_) abandon();
}

void CacheWriter::abandon() noexcept {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_path_, ec);
}

void CacheWriter::write_bytes(const std::string& bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out_) {
        abandon();
        throw CacheError("write failed for " + tmp_path_.string());
    }
    position_ += bytes.size();
}

void CacheWriter::append(const CacheRecord& record) {
    if (committed_) throw CacheError("cache already committed");
    if (record.frame != records_written()) {
        throw CacheError("cache records must be dense: expected frame " + std::to_string(records_written()) +
                         ", got " + std::to_string(record.frame));
    }
    const std::string bytes = encode_record(record);
    offsets_.push_back(position_);
    write_bytes(bytes);
}

std::uint64_t CacheWriter::commit() {
    if (committed_) throw CacheError("cache already committed");
    if (records_written() != header_.frame_count) {
        throw CacheError("header announces " + std::to_string(header_.frame_count) + " frames but " +
                         std::to_string(records_written()) + " were written");
    }
    std::string footer;
    for (auto off : offsets_) put_u64(footer, off);
    put_u64(footer, offsets_.size());
    footer.append(kCacheMagic, sizeof(kCacheMagic));
    write_bytes(footer);
    out_.flush();
    out_.close();
    if (out_.fail()) {
        abandon();
        throw CacheError("failed to finalize " + tmp_path_.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path_, path_, ec);
    if (ec) {
        abandon();
        throw CacheError("cannot publish cache " + path_.string() + ": " + ec.message());
    }
    committed_ = true;
    return position_;
}

std::uint64_t write_cache(const std::filesystem::path& path, const CacheHeader& header,
                          std::span<const CacheRecord> records) {
    CacheWriter writer(path, header);
    for (const auto& r : records) writer.append(r);
    return writer.commit();
}

// ---- reader ---------------------------------------------------------------

CacheReader::CacheReader(const std::filesystem::path& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw CacheError("cannot open cache " + path.string());
    file_size_ = std::filesystem::file_size(path);

    std::string line;
    if (!std::getline(in_, line)) throw CacheError("cache has no header line");
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw CacheError("cache header is not valid JSON");
    header_ = CacheHeader::from_json(j);
    records_begin_ = line.size() + 1;
    records_end_ = file_size_;

    if (file_size_ >= records_begin_ + kTrailerBytes) {
        unsigned char trailer[kTrailerBytes];
        in_.seekg(static_cast<std::streamoff>(file_size_ - kTrailerBytes));
        in_.read(reinterpret_cast<char*>(trailer), kTrailerBytes);
        const std::uint64_t count = get_le(trailer, 8);
        const bool magic_ok = std::memcmp(trailer + 8, kCacheMagic, 4) == 0;
        const std::uint64_t table_bytes = count * 8;
        if (in_ && magic_ok && count == static_cast<std::uint64_t>(header_.frame_count) &&
            table_bytes <= file_size_ - kTrailerBytes - records_begin_) {
            const std::uint64_t table_start = file_size_ - kTrailerBytes - table_bytes;
            std::vector<unsigned char> table(table_bytes);
            in_.seekg(static_cast<std::streamoff>(table_start));
            in_.read(reinterpret_cast<char*>(table.data()), static_cast<std::streamsize>(table_bytes));
            std::vector<std::uint64_t> offsets(count);
            bool ok = static_cast<bool>(in_);
            for (std::uint64_t i = 0; ok && i < count; ++i) {
                offsets[i] = get_le(&table[i * 8], 8);
                const std::uint64_t lower = i == 0 ? records_begin_ : offsets[i - 1] + 4 + kRecordFixedBytes;
                ok = i == 0 ? offsets[i] == records_begin_ : offsets[i] >= lower;
                ok = ok && offsets[i] < table_start;
            }
            if (ok) {
                offsets_ = std::move(offsets);
                records_end_ = table_start;
                indexed_ = true;
            }
        }
        in_.clear();
    }
    cursor_ = records_begin_;
}

CacheRecord CacheReader::read_record_at(std::uint64_t offset, std::uint64_t* next_offset) {
    const std::int64_t last_good = next_frame_ - 1;
    if (offset + 4 > records_end_) {
        throw CacheError("cache truncated after frame " + std::to_string(last_good), last_good);
    }
    unsigned char len_buf[4];
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(offset));
    in_.read(reinterpret_cast<char*>(len_buf), 4);
    const std::uint64_t len = get_le(len_buf, 4);
    if (!in_ || offset + 4 + len > records_end_) {
        throw CacheError("cache truncated after frame " + std::to_string(last_good), last_good);
    }
    std::vector<unsigned char> payload(len);
    in_.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(len));
    if (!in_) throw CacheError("cache truncated after frame " + std::to_string(last_good), last_good);
    if (len < kRecordFixedBytes) throw CacheError("corrupt cache record", last_good);
    const std::uint64_t count = get_le(&payload[4], 2);
    if (len != kRecordFixedBytes + count * kTrackBytes) throw CacheError("corrupt cache record", last_good);

    CacheRecord r;
    r.frame = static_cast<std::int64_t>(get_le(&payload[0], 4));
    r.tracks.reserve(count);
    const unsigned char* p = payload.data() + kRecordFixedBytes;
    for (std::uint64_t i = 0; i < count; ++i, p += kTrackBytes) {
        TrackOutput t;
        t.track_id = static_cast<std::int64_t>(get_le(p, 4));
        const auto cls = class_from_id(p[4]);
        if (!cls) throw CacheError("unknown class id in cache record", last_good);
        t.cls = *cls;
        t.box = {get_f32(p + 5), get_f32(p + 9), get_f32(p + 13), get_f32(p + 17)};
        t.score = get_f32(p + 21);
        r.tracks.push_back(t);
    }
    if (next_offset) *next_offset = offset + 4 + len;
    return r;
}

std::optional<CacheRecord> CacheReader::next() {
    if (next_frame_ == header_.frame_count) {
        if (!indexed_) {
            throw CacheError("cache is missing its offset table (last valid frame " +
                                 std::to_string(next_frame_ - 1) + ")",
                             next_frame_ - 1);
        }
        return std::nullopt;
    }
    std::uint64_t next_offset = 0;
    CacheRecord r = read_record_at(cursor_, &next_offset);
    if (r.frame != next_frame_) {
        throw CacheError("cache record out of order: expected frame " + std::to_string(next_frame_),
                         next_frame_ - 1);
    }
    cursor_ = next_offset;
    ++next_frame_;
    return r;
}

void CacheReader::rewind() {
    cursor_ = records_begin_;
    next_frame_ = 0;
}

CacheRecord CacheReader::read_frame(std::int64_t index) {
    if (!indexed_) throw CacheError("random access requires the offset table");
    if (index < 0 || index >= header_.frame_count) throw CacheError("frame index out of range");
    const auto saved = next_frame_;
    next_frame_ = index;
    CacheRecord r = read_record_at(offsets_[static_cast<std::size_t>(index)], nullptr);
    next_frame_ = saved;
    if (r.frame != index) throw CacheError("offset table points at the wrong record");
    return r;
}

std::optional<std::string> CacheReader::video_warning(const std::filesystem::path& video_path) const {
    try {
        const FileIdentity current = identify_file(video_path);
        if (current.digest != header_.video.digest || current.bytes != header_.video.bytes) {
            return "input " + video_path.string() + " differs from the one this cache was built from";
        }
    } catch (const std::exception& e) {
        return std::string("cannot verify cache input: ") + e.what();
    }
    return std::nullopt;
}

std::vector<CacheRecord> read_all_records(CacheReader& reader) {
    reader.rewind();
    std::vector<CacheRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

// ---- replay ---------------------------------------------------------------

ReplayStats replay(CacheReader& reader, std::span<ReplaySink* const> sinks, Pacing pacing) {
    using clock = std::chrono::steady_clock;
    if (pacing.fps && !(*pacing.fps > 0.0)) throw std::invalid_argument("replay fps must be positive");
    reader.rewind();
    ReplayStats stats;
    const auto start = clock::now();
    auto deadline_for = [&](std::int64_t i) {
        return start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(i / *pacing.fps));
    };
    auto last = start;
    while (true) {
        if (pacing.fps) std::this_thread::sleep_until(deadline_for(stats.frames));
        std::optional<CacheRecord> record = reader.next();
        if (!record) break;
        for (auto* sink : sinks) {
            try {
                sink->on_frame(*record);
            } catch (const std::exception& e) {
                throw ReplayError(record->frame, e.what());
            }
        }
        const auto now = clock::now();
        stats.frame_seconds.push_back(std::chrono::duration<double>(now - last).count());
        last = now;
        ++stats.frames;
    }
    if (pacing.fps) std::this_thread::sleep_until(deadline_for(stats.frames));
    stats.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return stats;
}

}  // namespace aiv
