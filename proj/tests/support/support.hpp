#pragma once

// Shared helpers for the unit and acceptance tests: temporary directories,
// brute-force oracles and synthetic scenes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "aiv/assignment.hpp"
#include "aiv/counting.hpp"
#include "aiv/detection.hpp"
#include "aiv/frame_source.hpp"
#include "aiv/tracker.hpp"

namespace aiv::testing {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

fs::path fixture_dir();
/// Copies a fixture directory into `dst` and returns dst.
fs::path copy_fixture(const std::string& name, const fs::path& dst);
std::string slurp(const fs::path& p);
void spit(const fs::path& p, const std::string& text);

/// Optimum by enumeration: maximum number of feasible matches, then
/// minimum total cost.
struct BruteForce {
    std::size_t matches = 0;
    double cost = 0.0;
};
BruteForce brute_force_assignment(const Matrix& cost, const std::vector<std::uint8_t>& feasible);

/// Runs the tracker over a detection stream. With `high_only` the low band
/// is dropped, which turns the two-stage association into a one-stage one.
std::vector<FrameOutput> track_stream(const DetectionStream& stream, const TrackerParams& params,
                                      std::int64_t frames = -1, bool high_only = false);
std::set<std::int64_t> track_ids(const std::vector<FrameOutput>& outputs);

/// Ten non-overlapping vehicles on straight lines with exact detections,
/// one lane each, all crossing a vertical finish strip.
struct LinearScene {
    int width = 1280;
    int height = 720;
    std::int64_t frames = 200;
    DetectionStream detections;
    GTStream gt;
    CountingConfig zones;
    std::map<VehicleClass, std::int64_t> vehicles_per_class;
};
LinearScene make_linear_scene(std::uint64_t seed, int tracks = 10, std::int64_t frames = 200);

/// Two equally sized squares (A red, B blue) approach on one row, B passes
/// in front of A so only B is detected while they overlap, and both turn
/// back at the meeting frame.
struct CrossingScene {
    int width = 640;
    int height = 240;
    std::int64_t frames = 45;
    std::vector<Detection> detections;
    GTStream gt;  // gt_id 1 = A, 2 = B
    Raster render(std::int64_t frame) const;
};
CrossingScene make_crossing_scene();

/// For each predicted track id, the set of gt ids it was matched to.
std::map<std::int64_t, std::set<std::int64_t>> id_coverage(const std::vector<FrameOutput>& outputs, const GTStream& gt);

/// Dense per-frame GT converted to track outputs (gt_id as track id).
std::vector<FrameOutput> gt_as_predictions(const GTStream& gt, std::int64_t frames);

}  // namespace aiv::testing
