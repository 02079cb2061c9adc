// Command-line front end: headless runs, counting, evaluation, replay and
// the HTTP service.

#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "aiv/cache.hpp"
#include "aiv/counting.hpp"
#include "aiv/server.hpp"
#include "aiv/session.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Configs {
    aiv::TrackerParams tracker;
    aiv::DetectorConfig detector;
};

// Either bare tracker parameters or {"tracker": {...}, "detector": {...}}.
Configs load_configs(const std::string& params_path, const std::string& detector_path) {
    Configs c;
    if (!params_path.empty()) {
        const json j = aiv::read_json_file(params_path);
        if (j.is_object() && (j.contains("tracker") || j.contains("detector"))) {
            if (j.contains("tracker")) c.tracker = aiv::TrackerParams::from_json(j["tracker"]);
            if (j.contains("detector")) c.detector = aiv::detector_config_from_json(j["detector"]);
        } else {
            c.tracker = aiv::TrackerParams::from_json(j);
        }
    }
    if (!detector_path.empty()) c.detector = aiv::detector_config_from_json(aiv::read_json_file(detector_path));
    return c;
}

void print_totals(const aiv::CountLedger& ledger) {
    for (auto cls : aiv::kAllClasses) {
        const auto n = ledger.total(cls);
        if (n > 0) std::cout << "  " << aiv::class_name(cls) << ": " << n << '\n';
    }
    std::cout << "  events: " << ledger.events().size() << '\n';
}

class CountingSink final : public aiv::ReplaySink {
public:
    explicit CountingSink(const aiv::CountingConfig& cfg) : engine_(cfg) {}
    void on_frame(const aiv::CacheRecord& r) override { engine_.consume(r); }
    const aiv::CountLedger& ledger() const { return engine_.ledger(); }

private:
    aiv::CountingEngine engine_;
};

class ProgressSink final : public aiv::ReplaySink {
public:
    explicit ProgressSink(std::int64_t total) : total_(total) {}
    void on_frame(const aiv::CacheRecord& r) override {
        if ((r.frame + 1) % 30 == 0 || r.frame + 1 == total_) {
            std::cerr << "\rreplayed " << r.frame + 1 << "/" << total_ << std::flush;
        }
    }

private:
    std::int64_t total_;
};

aiv::ApiServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vehicle tracking, counting and evaluation"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Track a detection stream and write a session with its cache");
    std::string dets, params, detector_cfg, out, frames_dir, video, mask_file;
    bool gallery = false;
    int width = 0, height = 0;
    double fps = 0;
    run->add_option("--dets", dets, "Detection stream (.dets.jsonl)")->required()->check(CLI::ExistingFile);
    run->add_option("--params", params, "Tracker parameters JSON")->check(CLI::ExistingFile);
    run->add_option("--detector", detector_cfg, "Detector config JSON")->check(CLI::ExistingFile);
    run->add_option("--out", out, "Session directory")->required();
    run->add_option("--frames", frames_dir, "Directory of frame images")->check(CLI::ExistingDirectory);
    run->add_option("--video", video, "Source video (identity and mask sidecar)")->check(CLI::ExistingFile);
    run->add_option("--mask", mask_file, "Mask polygons JSON")->check(CLI::ExistingFile);
    run->add_option("--width", width);
    run->add_option("--height", height);
    run->add_option("--fps", fps);
    run->add_flag("--gallery", gallery, "Register vehicle templates (needs --frames)");

    // count
    auto* count = app.add_subcommand("count", "Count vehicles for a session");
    std::string session_dir, zone_file, method_name;
    bool quick = false, as_json = false;
    count->add_option("--session", session_dir)->required()->check(CLI::ExistingDirectory);
    count->add_option("--zone", zone_file, "Zones JSON (finish_line and/or motion_vector)")->check(CLI::ExistingFile);
    count->add_option("--method", method_name, "finish_line or motion_vector (default: all configured)");
    count->add_flag("--quick", quick, "Count from the cache instead of re-running");
    count->add_flag("--json", as_json, "Print the ledger as JSON");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a session against ground truth");
    std::string gt_file;
    bool table = false;
    eval->add_option("--session", session_dir)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--gt", gt_file, "Ground truth (.gt.jsonl)")->required();
    eval->add_flag("--table", table, "Print an aligned table instead of JSON");

    // replay
    auto* replay = app.add_subcommand("replay", "Replay a session cache");
    double replay_fps = 0;
    replay->add_option("--session", session_dir)->required()->check(CLI::ExistingDirectory);
    replay->add_option("--fps", replay_fps, "Pacing in frames per second (0: as fast as possible)");
    replay->add_option("--zone", zone_file, "Count while replaying")->check(CLI::ExistingFile);

    // hash-config
    auto* hash = app.add_subcommand("hash-config", "Print the configuration hash used to key caches");
    hash->add_option("--params", params)->required()->check(CLI::ExistingFile);
    hash->add_option("--detector", detector_cfg)->check(CLI::ExistingFile);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    std::string data_dir = std::getenv("AIV_DATA_DIR") ? std::getenv("AIV_DATA_DIR") : "./aiv-data";
    std::string bind = std::getenv("AIV_BIND") ? std::getenv("AIV_BIND") : "127.0.0.1:7070";
    serve->add_option("--data", data_dir, "Session root (AIV_DATA_DIR)");
    serve->add_option("--bind", bind, "host:port (AIV_BIND)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const Configs cfg = load_configs(params, detector_cfg);
            aiv::SessionSpec spec;
            spec.detections = fs::absolute(dets).string();
            if (!frames_dir.empty()) spec.frames_dir = fs::absolute(frames_dir).string();
            if (!video.empty()) spec.video = fs::absolute(video).string();
            if (width > 0) spec.width = width;
            if (height > 0) spec.height = height;
            if (fps > 0) spec.fps = fps;
            spec.tracker = cfg.tracker;
            spec.detector = cfg.detector;
            spec.gallery = gallery;
            spec.gallery_config.min_score = cfg.tracker.score_high;
            auto s = aiv::Session::create(out, spec);
            if (!mask_file.empty()) s->set_mask(aiv::polygons_from_json(aiv::read_json_file(mask_file)));
            s->run_blocking();
            const auto d = s->describe();
            std::cout << "session " << s->id() << ": " << d["progress"]["frames_processed"] << " frames, state "
                      << d["state"].get<std::string>() << '\n'
                      << "cache " << s->cache_path().string() << '\n'
                      << "config " << s->config_hash() << '\n';
            return 0;
        }
        if (*count) {
            auto s = aiv::Session::open(session_dir);
            if (!zone_file.empty()) s->set_zones(aiv::CountingConfig::from_json(aiv::read_json_file(zone_file)));
            std::optional<aiv::CountMethod> method;
            if (!method_name.empty() && method_name != "all") {
                method = aiv::method_from_name(method_name);
                if (!method) throw std::invalid_argument("unknown method " + method_name);
            }
            const auto entry = s->count(method, quick ? aiv::CountMode::Quick : aiv::CountMode::Full);
            if (as_json) {
                std::cout << entry.to_json().dump(2) << '\n';
            } else {
                std::cout << entry.mode << " count #" << entry.index << " (" << entry.method << ")\n";
                print_totals(entry.ledger);
            }
            return 0;
        }
        if (*eval) {
            auto s = aiv::Session::open(session_dir);
            const auto report = s->evaluate(gt_file);
            if (table) {
                std::cout << report.to_table();
            } else {
                std::cout << s->report()->dump(2) << '\n';
            }
            return 0;
        }
        if (*replay) {
            auto s = aiv::Session::open(session_dir);
            aiv::CacheReader reader(s->cache_path());
            if (!reader.config_matches(s->config_hash())) {
                throw aiv::ConfigMismatchError("cache does not match the session configuration; re-run it");
            }
            if (auto warn = reader.video_warning(s->spec().identity_path())) std::cerr << "warning: " << *warn << '\n';
            std::vector<aiv::ReplaySink*> sinks;
            ProgressSink progress(reader.header().frame_count);
            sinks.push_back(&progress);
            std::optional<CountingSink> counter;
            if (!zone_file.empty()) {
                counter.emplace(aiv::CountingConfig::from_json(aiv::read_json_file(zone_file)));
                sinks.push_back(&*counter);
            }
            const auto pacing = replay_fps > 0 ? aiv::Pacing::real_time(replay_fps) : aiv::Pacing::as_fast();
            const auto stats = aiv::replay(reader, sinks, pacing);
            std::cerr << '\n';
            std::cout << "replayed " << stats.frames << " frames in " << stats.seconds << " s ("
                      << (stats.seconds > 0 ? static_cast<double>(stats.frames) / stats.seconds : 0.0) << " fps)\n";
            if (counter) print_totals(counter->ledger());
            return 0;
        }
        if (*hash) {
            const Configs cfg = load_configs(params, detector_cfg);
            std::cout << aiv::config_hash(cfg.tracker, cfg.detector) << '\n';
            return 0;
        }
        if (*serve) {
            const auto addr = aiv::parse_bind(bind);
            aiv::SessionManager sessions(data_dir);
            aiv::ApiServer server(sessions);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving " << sessions.ids().size() << " session(s) from " << data_dir << " on " << addr.host
                      << ':' << addr.port << '\n';
            if (!server.listen(addr)) {
                std::cerr << "error: cannot bind " << bind << '\n';
                return 1;
            }
            return 0;
        }
    } catch (const aiv::ValidationError& e) {
        std::cerr << "error: invalid configuration\n";
        for (const auto& f : e.errors()) std::cerr << "  " << f.field << ": " << f.message << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
