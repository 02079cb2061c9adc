#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "aiv/metrics.hpp"

namespace aiv::testing {

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "aiv-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

fs::path fixture_dir() { return AIV_FIXTURE_DIR; }

fs::path copy_fixture(const std::string& name, const fs::path& dst) {
    fs::create_directories(dst);
    for (const auto& e : fs::directory_iterator(fixture_dir() / name)) {
        fs::copy_file(e.path(), dst / e.path().filename(), fs::copy_options::overwrite_existing);
    }
    return dst;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

BruteForce brute_force_assignment(const Matrix& cost, const std::vector<std::uint8_t>& feasible) {
    BruteForce best;
    bool have = false;
    std::vector<char> used(cost.cols, 0);
    std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t r, std::size_t n, double c) {
        if (r == cost.rows) {
            if (!have || n > best.matches || (n == best.matches && c < best.cost - 1e-12)) {
                best = {n, c};
                have = true;
            }
            return;
        }
        rec(r + 1, n, c);
        for (std::size_t col = 0; col < cost.cols; ++col) {
            if (used[col] || !feasible[r * cost.cols + col]) continue;
            used[col] = 1;
            rec(r + 1, n + 1, c + cost(r, col));
            used[col] = 0;
        }
    };
    rec(0, 0, 0.0);
    return best;
}

std::vector<FrameOutput> track_stream(const DetectionStream& stream, const TrackerParams& params,
                                      std::int64_t frames, bool high_only) {
    if (frames < 0) frames = implied_frame_count(stream);
    std::map<std::int64_t, std::vector<Detection>> by_frame;
    for (const auto& d : stream.detections) by_frame[d.frame].push_back(d);
    DetectorConfig cfg;
    cfg.score_threshold = params.score_high;
    Tracker tracker(params);
    std::vector<FrameOutput> out;
    for (std::int64_t f = 0; f < frames; ++f) {
        const auto& dets = by_frame[f];
        auto bands = filter_detections(dets, cfg, nullptr, std::nullopt, params.score_low);
        if (high_only) bands.low.clear();
        out.push_back(tracker.step(f, bands.high, bands.low));
    }
    return out;
}

std::set<std::int64_t> track_ids(const std::vector<FrameOutput>& outputs) {
    std::set<std::int64_t> ids;
    for (const auto& f : outputs) {
        for (const auto& t : f.tracks) ids.insert(t.track_id);
    }
    return ids;
}

LinearScene make_linear_scene(std::uint64_t seed, int tracks, std::int64_t frames) {
    static const std::pair<VehicleClass, std::pair<double, double>> kinds[] = {
        {VehicleClass::Car, {60, 36}},        {VehicleClass::Bus, {110, 44}},     {VehicleClass::Truck, {90, 44}},
        {VehicleClass::Motorcycle, {30, 24}}, {VehicleClass::Bicycle, {26, 22}},
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> speed_d(4.0, 5.5), offset_d(0.0, 30.0);
    std::bernoulli_distribution right_d(0.5);

    LinearScene s;
    s.frames = frames;
    s.detections.header = StreamHeader{1, s.width, s.height, 30.0};
    s.gt.header = s.detections.header;
    for (int k = 0; k < tracks; ++k) {
        const auto [cls, size] = kinds[k % 5];
        const double w = size.first, h = size.second;
        const double y = 16.0 + 70.0 * k + (44.0 - h) / 2.0;
        const bool right = right_d(rng);
        const double speed = speed_d(rng) * (right ? 1.0 : -1.0);
        const double x0 = right ? 10.0 + offset_d(rng) : s.width - w - 10.0 - offset_d(rng);
        for (std::int64_t f = 0; f < frames; ++f) {
            const BBox box{x0 + speed * static_cast<double>(f), y, w, h};
            s.gt.records.push_back({f, k + 1, cls, box});
            s.detections.detections.push_back({f, cls, 0.9, box});
        }
        s.vehicles_per_class[cls] += 1;
    }
    auto by_frame = [](const auto& a, const auto& b) { return a.frame < b.frame; };
    std::stable_sort(s.gt.records.begin(), s.gt.records.end(), by_frame);
    std::stable_sort(s.detections.detections.begin(), s.detections.detections.end(), by_frame);
    s.zones.finish_line = FinishLineZone{
        Polygon({{600, 0}, {680, 0}, {680, static_cast<double>(s.height)}, {600, static_cast<double>(s.height)}}), 5};
    return s;
}

namespace {
constexpr double kSquare = 40.0;
constexpr double kRowY = 100.0;
constexpr std::int64_t kTurn = 25;

double crossing_ax(std::int64_t f) { return f <= kTurn ? 100.0 + 8.0 * f : 300.0 - 8.0 * (f - kTurn); }
double crossing_bx(std::int64_t f) { return f <= kTurn ? 500.0 - 8.0 * f : 300.0 + 8.0 * (f - kTurn); }
}  // namespace

CrossingScene make_crossing_scene() {
    CrossingScene s;
    s.gt.header = StreamHeader{1, s.width, s.height, 30.0};
    for (std::int64_t f = 0; f < s.frames; ++f) {
        const BBox a{crossing_ax(f), kRowY, kSquare, kSquare};
        const BBox b{crossing_bx(f), kRowY, kSquare, kSquare};
        s.gt.records.push_back({f, 1, VehicleClass::Car, a});
        s.gt.records.push_back({f, 2, VehicleClass::Car, b});
        const bool hidden = std::abs(a.x - b.x) < kSquare;
        if (!hidden) s.detections.push_back({f, VehicleClass::Car, 0.9, a});
        s.detections.push_back({f, VehicleClass::Car, 0.9, b});
    }
    return s;
}

Raster CrossingScene::render(std::int64_t frame) const {
    Raster r(width, height, 90, 90, 90);
    r.fill_rect({crossing_ax(frame), kRowY, kSquare, kSquare}, 220, 30, 30);
    r.fill_rect({crossing_bx(frame), kRowY, kSquare, kSquare}, 30, 30, 220);
    return r;
}

std::map<std::int64_t, std::set<std::int64_t>> id_coverage(const std::vector<FrameOutput>& outputs,
                                                          const GTStream& gt) {
    std::map<std::int64_t, std::vector<GTRecord>> by_frame;
    for (const auto& g : gt.records) by_frame[g.frame].push_back(g);
    std::map<std::int64_t, std::set<std::int64_t>> cover;
    for (const auto& f : outputs) {
        const auto m = match_frame(f.frame, by_frame[f.frame], f.tracks);
        for (const auto& p : m.matches) cover[p.track_id].insert(p.gt_id);
    }
    return cover;
}

std::vector<FrameOutput> gt_as_predictions(const GTStream& gt, std::int64_t frames) {
    std::vector<FrameOutput> out(static_cast<std::size_t>(frames));
    for (std::int64_t f = 0; f < frames; ++f) out[static_cast<std::size_t>(f)].frame = f;
    for (const auto& g : gt.records) {
        out[static_cast<std::size_t>(g.frame)].tracks.push_back({g.gt_id, g.cls, g.box, 1.0F});
    }
    for (auto& f : out) {
        std::sort(f.tracks.begin(), f.tracks.end(), [](auto& a, auto& b) { return a.track_id < b.track_id; });
    }
    return out;
}

}  // namespace aiv::testing
