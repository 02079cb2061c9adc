#include "aiv/session.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "aiv/digest.hpp"
#include "aiv/pipeline.hpp"
#include "aiv/quick_count.hpp"

namespace aiv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(WallClock::now().time_since_epoch()).count();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SessionError(SessionError::Kind::BadRequest, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

json read_json_file(const fs::path& path) {
    const std::string text = read_text(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SessionError(SessionError::Kind::BadRequest, path.string() + " is not valid JSON");
    return j;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string_view state_name(SessionState s) noexcept {
    switch (s) {
        case SessionState::Created: return "created";
        case SessionState::Running: return "running";
        case SessionState::Cached: return "cached";
        case SessionState::Counting: return "counting";
        case SessionState::Done: return "done";
        case SessionState::Failed: return "failed";
    }
    return "failed";
}

std::optional<SessionState> state_from_name(std::string_view s) noexcept {
    for (auto st : {SessionState::Created, SessionState::Running, SessionState::Cached, SessionState::Counting,
                    SessionState::Done, SessionState::Failed}) {
        if (state_name(st) == s) return st;
    }
    return std::nullopt;
}

fs::path mask_sidecar_path(const fs::path& input) {
    fs::path p = input;
    p.replace_extension(".mask.json");
    return p;
}

// ---- spec -----------------------------------------------------------------

json SessionSpec::to_json() const {
    json j = {{"detections", detections},
              {"tracker", tracker.to_json()},
              {"detector", detector_config_to_json(detector)},
              {"gallery", gallery},
              {"gallery_config", {{"min_crop_px", gallery_config.min_crop_px},
                                  {"min_score", gallery_config.min_score},
                                  {"anonymize", gallery_config.anonymize}}}};
    if (frames_dir) j["frames_dir"] = *frames_dir;
    if (video) j["video"] = *video;
    if (adapter) j["adapter"] = {{"executable", adapter->executable}, {"model", adapter->model}, {"args", adapter->args}};
    if (width) j["width"] = *width;
    if (height) j["height"] = *height;
    if (fps) j["fps"] = *fps;
    if (frames) j["frames"] = *frames;
    return j;
}

SessionSpec SessionSpec::from_json(const json& j) {
    if (!j.is_object()) throw ValidationError(std::vector<FieldError>{{"body", "must be a JSON object"}});
    SessionSpec s;
    std::vector<FieldError> errs;
    auto str = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_string()) {
            errs.push_back({key, "must be a string"});
        } else {
            out = j[key].template get<std::string>();
        }
    };
    str("detections", s.detections);
    str("frames_dir", s.frames_dir);
    str("video", s.video);
    auto positive_int = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() || j[key].template get<std::int64_t>() <= 0) {
            errs.push_back({key, "must be a positive integer"});
        } else {
            out = j[key].template get<std::int64_t>();
        }
    };
    positive_int("width", s.width);
    positive_int("height", s.height);
    positive_int("frames", s.frames);
    if (j.contains("fps")) {
        if (!j["fps"].is_number() || !(j["fps"].get<double>() > 0.0)) {
            errs.push_back({"fps", "must be a positive number"});
        } else {
            s.fps = j["fps"].get<double>();
        }
    }
    if (j.contains("adapter")) {
        const auto& a = j["adapter"];
        if (!a.is_object() || !a.contains("executable") || !a["executable"].is_string()) {
            errs.push_back({"adapter.executable", "required string"});
        } else {
            AdapterSpec spec;
            spec.executable = a["executable"].get<std::string>();
            spec.model = a.value("model", "");
            if (a.contains("args")) {
                if (!a["args"].is_array()) {
                    errs.push_back({"adapter.args", "must be a list of strings"});
                } else {
                    for (const auto& arg : a["args"]) {
                        if (arg.is_string()) spec.args.push_back(arg.get<std::string>());
                        else errs.push_back({"adapter.args", "must be a list of strings"});
                    }
                }
            }
            s.adapter = spec;
        }
    }
    if (j.contains("tracker")) {
        try {
            s.tracker = TrackerParams::from_json(j["tracker"]);
        } catch (const ValidationError& e) {
            for (const auto& f : e.errors()) errs.push_back({"tracker." + f.field, f.message});
        }
    }
    if (j.contains("detector")) {
        try {
            s.detector = detector_config_from_json(j["detector"]);
        } catch (const ValidationError& e) {
            for (const auto& f : e.errors()) errs.push_back(f);
        }
    }
    if (j.contains("gallery")) {
        if (!j["gallery"].is_boolean()) errs.push_back({"gallery", "must be a boolean"});
        else s.gallery = j["gallery"].get<bool>();
    }
    s.gallery_config.min_score = s.tracker.score_high;
    if (j.contains("gallery_config")) {
        const auto& g = j["gallery_config"];
        if (!g.is_object()) {
            errs.push_back({"gallery_config", "must be an object"});
        } else {
            s.gallery_config.min_crop_px = g.value("min_crop_px", s.gallery_config.min_crop_px);
            s.gallery_config.min_score = g.value("min_score", s.gallery_config.min_score);
            s.gallery_config.anonymize = g.value("anonymize", false);
        }
    }
    if (s.detections.empty() && !s.adapter) errs.push_back({"detections", "a detection file or an adapter is required"});
    if (s.adapter && !s.frames_dir && !s.video) errs.push_back({"video", "the adapter needs a video or frames_dir"});
    if (!errs.empty()) throw ValidationError(std::move(errs));
    return s;
}

fs::path SessionSpec::identity_path() const {
    if (video) return *video;
    if (!detections.empty()) return detections;
    if (frames_dir && fs::is_directory(*frames_dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(*frames_dir)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (!files.empty()) return files.front();
    }
    return frames_dir.value_or("");
}

// ---- events ---------------------------------------------------------------

json StatusEvent::to_json() const {
    json j = {{"seq", seq}, {"session_id", session_id}, {"timestamp", timestamp_ms}, {"level", level},
              {"message", message}};
    j["frame"] = frame ? json(*frame) : json(nullptr);
    j["fps"] = fps ? json(*fps) : json(nullptr);
    return j;
}

StatusEvent StatusHub::publish(std::string level, std::string message, std::optional<std::int64_t> frame,
                               std::optional<double> fps) {
    StatusEvent e;
    {
        std::lock_guard lock(mu_);
        last_ts_ = std::max(last_ts_, now_ms());
        e = {events_.size() + 1, session_id_, last_ts_, std::move(level), std::move(message), frame, fps};
        events_.push_back(e);
    }
    cv_.notify_all();
    return e;
}

std::vector<StatusEvent> StatusHub::since(std::uint64_t after, std::chrono::milliseconds wait) const {
    std::unique_lock lock(mu_);
    if (wait.count() > 0) {
        cv_.wait_for(lock, wait, [&] { return events_.size() > after || closed_; });
    }
    if (events_.size() <= after) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

void StatusHub::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool StatusHub::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

json LedgerEntry::to_json() const {
    json j = ledger.to_json();
    j["index"] = index;
    j["method"] = method;
    j["mode"] = mode;
    j["zones"] = zones.to_json();
    return j;
}

// ---- session --------------------------------------------------------------

Session::Session(fs::path dir, SessionSpec spec)
    : id_(dir.filename().string()), dir_(std::move(dir)), spec_(std::move(spec)), hub_(id_) {
    gallery_ = std::make_unique<Gallery>(dir_ / "gallery", spec_.gallery_config);
}

Session::~Session() {
    hub_.close();
    std::lock_guard lock(worker_mu_);
    if (worker_.joinable()) worker_.join();
}

std::unique_ptr<FrameSource> Session::frame_source() const {
    if (spec_.frames_dir) {
        auto src = std::make_unique<ImageDirectorySource>(*spec_.frames_dir, spec_.fps.value_or(30.0));
        if (src->frame_count() == 0) throw SessionError(SessionError::Kind::BadRequest, "frames_dir has no images");
        return src;
    }
    std::optional<StreamHeader> header;
    std::int64_t implied = 0;
    if (!spec_.detections.empty()) {
        const auto stream = read_detection_file(spec_.detections);
        header = stream.header;
        implied = implied_frame_count(stream);
    }
    const int w = spec_.width.value_or(header ? header->width : 0);
    const int h = spec_.height.value_or(header ? header->height : 0);
    if (w <= 0 || h <= 0) {
        throw SessionError(SessionError::Kind::BadRequest,
                           "frame size unknown: add a stream header or width/height to the session");
    }
    const double fps = spec_.fps.value_or(header && header->fps > 0 ? header->fps : 30.0);
    return std::make_unique<HeadlessSource>(spec_.frames.value_or(implied), w, h, fps);
}

std::string Session::config_hash() const { return aiv::config_hash(spec_.tracker, spec_.detector); }

std::shared_ptr<Session> Session::create(const fs::path& dir, const SessionSpec& spec) {
    spec.tracker.validate();
    spec.detector.validate();
    if (!spec.detections.empty() && !fs::is_regular_file(spec.detections)) {
        throw SessionError(SessionError::Kind::BadRequest, "cannot read detections " + spec.detections);
    }
    if (spec.frames_dir && !fs::is_directory(*spec.frames_dir)) {
        throw SessionError(SessionError::Kind::BadRequest, "frames_dir " + *spec.frames_dir + " is not a directory");
    }
    if (spec.video && !fs::is_regular_file(*spec.video)) {
        throw SessionError(SessionError::Kind::BadRequest, "cannot read video " + *spec.video);
    }
    if (fs::exists(dir / "config.json")) {
        throw SessionError(SessionError::Kind::Conflict, "session directory " + dir.string() + " already in use");
    }
    std::shared_ptr<Session> s(new Session(dir, spec));
    try {
        const auto src = s->frame_source();
        s->frame_total_ = src->frame_count();
    } catch (const SessionError&) {
        throw;
    } catch (const std::exception& e) {
        throw SessionError(SessionError::Kind::BadRequest, e.what());
    }

    fs::create_directories(dir / "ledgers");
    const fs::path sidecar = mask_sidecar_path(spec.identity_path());
    if (fs::is_regular_file(sidecar)) {
        try {
            s->mask_ = polygons_from_json(read_json_file(sidecar));
            write_file_atomic(dir / "mask.json", polygons_to_json(s->mask_).dump(1));
            s->hub_.publish("info", "loaded saved mask " + sidecar.string());
        } catch (const std::exception& e) {
            s->mask_.clear();
            s->hub_.publish("warn", std::string("ignoring unreadable mask file: ") + e.what());
        }
    }
    {
        std::lock_guard lock(s->mu_);
        s->persist_locked();
    }
    s->hub_.publish("info", "session created");
    return s;
}

std::shared_ptr<Session> Session::open(const fs::path& dir) {
    const json cfg = read_json_file(dir / "config.json");
    std::shared_ptr<Session> s(new Session(dir, SessionSpec::from_json(cfg.at("spec"))));
    s->state_ = state_from_name(cfg.value("state", "created")).value_or(SessionState::Failed);
    if (cfg.contains("failure") && cfg["failure"].is_string()) s->failure_ = cfg["failure"].get<std::string>();
    s->progress_ = cfg.value("progress", std::int64_t{0});
    s->frame_total_ = cfg.value("frames", std::int64_t{0});

    if (fs::exists(dir / "mask.json")) s->mask_ = polygons_from_json(read_json_file(dir / "mask.json"));
    if (fs::exists(dir / "zones.json")) s->zones_ = CountingConfig::from_json(read_json_file(dir / "zones.json"));
    if (fs::exists(dir / "ledgers")) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir / "ledgers")) {
            if (e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const json j = read_json_file(f);
            LedgerEntry entry;
            entry.index = j.at("index").get<int>();
            entry.method = j.at("method").get<std::string>();
            entry.mode = j.at("mode").get<std::string>();
            entry.zones = CountingConfig::from_json(j.at("zones"));
            entry.ledger = CountLedger::from_json(j);
            s->ledgers_.push_back(std::move(entry));
        }
    }
    if (fs::exists(dir / "report.json")) s->report_ = read_json_file(dir / "report.json");
    if (fs::exists(dir / "timing.json")) {
        s->live_frame_seconds_ = read_json_file(dir / "timing.json").at("frame_seconds").get<std::vector<double>>();
    }

    // A process that died mid-run leaves either a complete cache or none.
    if (s->state_ == SessionState::Running || s->state_ == SessionState::Counting) {
        bool cache_ok = false;
        try {
            CacheReader reader(s->cache_path());
            cache_ok = reader.indexed();
        } catch (const std::exception&) {
        }
        s->state_ = cache_ok ? SessionState::Cached : SessionState::Failed;
        if (!cache_ok) s->failure_ = "interrupted before the cache was written";
        std::lock_guard lock(s->mu_);
        s->persist_locked();
    }
    s->hub_.publish("info", "session reopened");
    return s;
}

void Session::persist_locked() const {
    json j = {{"session_id", id_},
              {"spec", spec_.to_json()},
              {"state", state_name(state_)},
              {"progress", progress_},
              {"frames", frame_total_},
              {"config_hash", config_hash()}};
    j["failure"] = failure_ ? json(*failure_) : json(nullptr);
    write_file_atomic(dir_ / "config.json", j.dump(1) + "\n");
}

SessionState Session::state() const {
    std::lock_guard lock(mu_);
    return state_;
}

std::optional<std::string> Session::failure() const {
    std::lock_guard lock(mu_);
    return failure_;
}

json Session::describe() const {
    std::lock_guard lock(mu_);
    json j = {{"session_id", id_},
              {"state", state_name(state_)},
              {"progress", {{"frames_processed", progress_}, {"frame_count", frame_total_}}},
              {"fps", last_fps_},
              {"has_cache", fs::exists(dir_ / "cache.aiv")},
              {"mask", polygons_to_json(mask_)},
              {"ledgers", ledgers_.size()},
              {"has_report", report_.has_value()},
              {"has_pixels", spec_.frames_dir.has_value()},
              {"config_hash", config_hash()},
              {"spec", spec_.to_json()}};
    j["failure"] = failure_ ? json(*failure_) : json(nullptr);
    j["zones"] = zones_ ? zones_->to_json() : json(nullptr);
    return j;
}

std::vector<Polygon> Session::mask() const {
    std::lock_guard lock(mu_);
    return mask_;
}

void Session::set_mask(std::vector<Polygon> polygons) {
    const std::string text = polygons_to_json(polygons).dump(1);
    {
        std::lock_guard lock(mu_);
        mask_ = std::move(polygons);
        write_file_atomic(dir_ / "mask.json", text);
    }
    try {
        write_file_atomic(mask_sidecar_path(spec_.identity_path()), text);
    } catch (const std::exception& e) {
        hub_.publish("warn", std::string("mask not saved next to the input: ") + e.what());
    }
    hub_.publish("info", "mask updated");
}

std::optional<CountingConfig> Session::zones() const {
    std::lock_guard lock(mu_);
    return zones_;
}

bool Session::set_zones(const CountingConfig& zones) {
    std::lock_guard lock(mu_);
    if (zones_ && zones_->to_json() == zones.to_json()) return false;
    zones_ = zones;
    write_file_atomic(dir_ / "zones.json", zones.to_json().dump(1));
    return true;
}

bool Session::try_begin(SessionState next) {
    std::lock_guard lock(mu_);
    if (busy_) return false;
    if (next == SessionState::Counting && state_ != SessionState::Cached && state_ != SessionState::Done) return false;
    busy_ = true;
    state_ = next;
    if (next == SessionState::Running) {
        failure_.reset();
        progress_ = 0;
    }
    persist_locked();
    return true;
}

void Session::finish_run(std::optional<std::string> error) {
    {
        std::lock_guard lock(mu_);
        busy_ = false;
        state_ = error ? SessionState::Failed : SessionState::Cached;
        failure_ = error;
        persist_locked();
    }
    idle_cv_.notify_all();
    if (error) {
        hub_.publish("error", "run failed: " + *error);
    } else {
        hub_.publish("info", "run complete; cache written", progress_);
    }
}

void Session::wait() const {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return !busy_; });
}

void Session::execute_run(CountingEngine* engine) {
    using clock = std::chrono::steady_clock;
    const auto source = frame_source();
    std::unique_ptr<Detector> detector;
    if (spec_.adapter) {
        const std::string ref = spec_.video ? *spec_.video : *spec_.frames_dir;
        hub_.publish("info", "running inference adapter " + spec_.adapter->executable);
        const auto stream = run_inference_adapter(*source, *spec_.adapter, ref);
        detector = std::make_unique<PrecomputedDetector>(stream.detections);
    } else {
        detector = std::make_unique<PrecomputedDetector>(read_detection_file(spec_.detections).detections);
    }
    {
        std::lock_guard lock(mu_);
        frame_total_ = source->frame_count();
    }

    CacheWriter writer(cache_path(),
                       make_cache_header(*source, identify_file(spec_.identity_path()), spec_.tracker, spec_.detector));
    PipelineOptions opts;
    opts.tracker = spec_.tracker;
    opts.detector = spec_.detector;
    opts.mask = mask();
    opts.gallery = spec_.gallery && source->has_pixels() ? gallery_.get() : nullptr;

    auto last_event = clock::now();
    std::int64_t frames_at_last = 0;
    opts.on_frame = [&](const FrameOutput& out, double) {
        writer.append(out);
        if (engine) engine->consume(out);
        const auto now = clock::now();
        const std::int64_t done = out.frame + 1;
        const double elapsed = std::chrono::duration<double>(now - last_event).count();
        const bool last = done == source->frame_count();
        if (done - frames_at_last >= 30 || elapsed >= 1.0 || last) {
            const double fps = elapsed > 0 ? static_cast<double>(done - frames_at_last) / elapsed : 0.0;
            {
                std::lock_guard lock(mu_);
                progress_ = done;
                last_fps_ = fps;
            }
            hub_.publish("info", "processed " + std::to_string(done) + "/" + std::to_string(source->frame_count()),
                         out.frame, fps);
            last_event = now;
            frames_at_last = done;
        }
    };
    hub_.publish("info", "run started");
    const PipelineResult result = run_pipeline(*source, *detector, opts);
    writer.commit();
    {
        std::lock_guard lock(mu_);
        live_frame_seconds_ = result.frame_seconds;
        progress_ = static_cast<std::int64_t>(result.outputs.size());
    }
    write_file_atomic(dir_ / "timing.json", json{{"frame_seconds", result.frame_seconds}}.dump());
}

bool Session::start_run() {
    std::lock_guard lock(worker_mu_);
    if (!try_begin(SessionState::Running)) return false;
    if (worker_.joinable()) worker_.join();
    worker_ = std::thread([this] {
        try {
            execute_run(nullptr);
            finish_run(std::nullopt);
        } catch (const std::exception& e) {
            finish_run(std::string(e.what()));
        }
    });
    return true;
}

void Session::run_blocking() {
    if (!try_begin(SessionState::Running)) {
        throw SessionError(SessionError::Kind::Conflict, "a run is already in progress");
    }
    try {
        execute_run(nullptr);
    } catch (const std::exception& e) {
        finish_run(std::string(e.what()));
        throw;
    }
    finish_run(std::nullopt);
}

void Session::require_cache() const {
    if (!fs::exists(cache_path())) {
        throw SessionError(SessionError::Kind::Conflict, "no cached run for this session; start a run first");
    }
}

LedgerEntry Session::count(std::optional<CountMethod> method, CountMode mode,
                           const std::optional<CountingConfig>& zones) {
    std::optional<CountingConfig> cfg = zones ? zones : this->zones();
    if (!cfg) throw SessionError(SessionError::Kind::BadRequest, "no counting zones configured");
    if (method) {
        cfg = cfg->only(*method);
        if (!cfg->finish_line && !cfg->motion_vector) {
            throw SessionError(SessionError::Kind::BadRequest,
                               "zones do not define " + std::string(method_name(*method)));
        }
    }

    LedgerEntry entry;
    entry.method = method ? std::string(method_name(*method)) : "all";
    entry.mode = mode == CountMode::Quick ? "quick" : "full";
    entry.zones = *cfg;

    if (mode == CountMode::Quick) {
        {
            std::lock_guard lock(mu_);
            if (busy_) throw SessionError(SessionError::Kind::Conflict, "session is busy");
            if (state_ != SessionState::Cached && state_ != SessionState::Done) {
                throw SessionError(SessionError::Kind::Conflict,
                                   "quick count needs a cached run; start a run first (state is " +
                                       std::string(state_name(state_)) + ")");
            }
        }
        require_cache();
        if (!try_begin(SessionState::Counting)) throw SessionError(SessionError::Kind::Conflict, "session is busy");
        try {
            entry.ledger = quick_count(cache_path(), *cfg, config_hash());
        } catch (const ConfigMismatchError& e) {
            finish_run(std::nullopt);
            throw SessionError(SessionError::Kind::Conflict, e.what());
        } catch (const std::exception& e) {
            finish_run(std::nullopt);
            throw SessionError(SessionError::Kind::Unavailable, e.what());
        }
    } else {
        if (!try_begin(SessionState::Running)) {
            throw SessionError(SessionError::Kind::Conflict, "a run is already in progress");
        }
        CountingEngine engine(*cfg);
        try {
            execute_run(&engine);
        } catch (const std::exception& e) {
            finish_run(std::string(e.what()));
            throw SessionError(SessionError::Kind::Unavailable, e.what());
        }
        entry.ledger = engine.ledger();
    }

    {
        std::lock_guard lock(mu_);
        entry.index = static_cast<int>(ledgers_.size()) + 1;
        char name[64];
        std::snprintf(name, sizeof(name), "%03d-%s-%s", entry.index, entry.method.c_str(), entry.mode.c_str());
        write_file_atomic(dir_ / "ledgers" / (std::string(name) + ".json"), entry.to_json().dump(1));
        write_file_atomic(dir_ / "ledgers" / (std::string(name) + ".csv"), entry.ledger.to_csv());
        ledgers_.push_back(entry);
        busy_ = false;
        state_ = SessionState::Done;
        persist_locked();
    }
    idle_cv_.notify_all();
    std::string totals;
    for (const auto& [cls, n] : entry.ledger.totals()) {
        totals += (totals.empty() ? "" : ", ") + std::string(class_name(cls)) + " " + std::to_string(n);
    }
    hub_.publish("info", entry.mode + " count (" + entry.method + "): " + (totals.empty() ? "nothing counted" : totals));
    return entry;
}

std::vector<LedgerEntry> Session::ledgers() const {
    std::lock_guard lock(mu_);
    return ledgers_;
}

EvalReport Session::evaluate(const fs::path& gt_path, bool with_fps) {
    {
        std::lock_guard lock(mu_);
        if (busy_) throw SessionError(SessionError::Kind::Conflict, "session is busy");
    }
    require_cache();
    if (!fs::is_regular_file(gt_path)) {
        throw SessionError(SessionError::Kind::BadRequest, "cannot read ground truth " + gt_path.string());
    }
    GTStream gt;
    try {
        gt = read_gt_file(gt_path.string());
    } catch (const std::exception& e) {
        throw SessionError(SessionError::Kind::BadRequest, e.what());
    }
    CacheReader reader(cache_path());
    const auto records = read_all_records(reader);

    std::optional<LedgerEntry> latest;
    std::vector<double> timing;
    {
        std::lock_guard lock(mu_);
        if (!ledgers_.empty()) latest = ledgers_.back();
        timing = live_frame_seconds_;
    }
    EvalOptions opts;
    if (latest) {
        opts.ledger = &latest->ledger;
        opts.count_method = method_from_name(latest->method);
    }
    EvalReport rep;
    try {
        rep = aiv::evaluate(records, gt, opts);
    } catch (const MetricsError& e) {
        throw SessionError(SessionError::Kind::BadRequest, e.what());
    }
    if (with_fps && !timing.empty() && std::all_of(timing.begin(), timing.end(), [](double d) { return d > 0; })) {
        const std::vector<std::vector<double>> runs{timing};
        rep.fps = fps_stats(runs);
    }
    json j = rep.to_json();
    j["gt_path"] = fs::absolute(gt_path).string();
    if (rep.fps) j["fps"].erase("per_frame_fps");
    {
        std::lock_guard lock(mu_);
        write_file_atomic(dir_ / "report.json", j.dump(1));
        write_file_atomic(dir_ / "report.txt", rep.to_table());
        report_ = j;
    }
    hub_.publish("info", "evaluation stored");
    return rep;
}

std::optional<json> Session::report() const {
    std::lock_guard lock(mu_);
    return report_;
}

// ---- manager --------------------------------------------------------------

SessionManager::SessionManager(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    for (const auto& e : fs::directory_iterator(root_)) {
        if (!e.is_directory() || !fs::exists(e.path() / "config.json")) continue;
        try {
            auto s = Session::open(e.path());
            sessions_.emplace(s->id(), std::move(s));
        } catch (const std::exception&) {
            // unreadable leftovers are skipped, not fatal
        }
    }
}

std::shared_ptr<Session> SessionManager::create(const SessionSpec& spec) {
    std::lock_guard lock(mu_);
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::string id;
    do {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "s%03llu-%06llx", static_cast<unsigned long long>(++counter_),
                      static_cast<unsigned long long>(rng() & 0xFFFFFF));
        id = buf;
    } while (sessions_.contains(id) || fs::exists(root_ / id));
    auto s = Session::create(root_ / id, spec);
    sessions_.emplace(id, s);
    return s;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw SessionError(SessionError::Kind::NotFound, "no session " + id);
    return it->second;
}

std::vector<std::string> SessionManager::ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

}  // namespace aiv
