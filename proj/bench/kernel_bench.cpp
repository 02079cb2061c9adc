// OpenMP kernels against their serial references. Run with OMP_NUM_THREADS
// set to compare scaling; on one core the two should be close.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "aiv/kernels.hpp"
#include "aiv/metrics.hpp"

using namespace aiv;

namespace {

std::vector<BBox> random_boxes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0, 1800), size(10, 200);
    std::vector<BBox> out(n);
    for (auto& b : out) b = {pos(rng), pos(rng) * 0.55, size(rng), size(rng)};
    return out;
}

std::vector<Polygon> random_polygons(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> cx(100, 1820), cy(100, 980), r(20, 300);
    std::vector<Polygon> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = cx(rng), y = cy(rng), rad = r(rng);
        out.emplace_back(std::vector<Point>{{x - rad, y}, {x, y - rad}, {x + rad, y + rad * 0.5}, {x - rad * 0.3, y + rad}});
    }
    return out;
}

struct Sequence {
    std::vector<FrameOutput> preds;
    std::vector<std::vector<GTRecord>> gt;
};

Sequence random_sequence(std::int64_t frames, std::size_t per_frame) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> jitter(0, 3);
    Sequence s;
    const auto base = random_boxes(per_frame, 11);
    for (std::int64_t f = 0; f < frames; ++f) {
        FrameOutput out{f, {}};
        std::vector<GTRecord> g;
        for (std::size_t k = 0; k < per_frame; ++k) {
            BBox b = base[k];
            b.x += 2.0 * static_cast<double>(f);
            g.push_back({f, static_cast<std::int64_t>(k + 1), VehicleClass::Car, b});
            b.x += jitter(rng);
            b.y += jitter(rng);
            out.tracks.push_back({static_cast<std::int64_t>(k + 1), VehicleClass::Car, b, 0.9F});
        }
        s.preds.push_back(std::move(out));
        s.gt.push_back(std::move(g));
    }
    return s;
}

template <Matrix (*Fn)(std::span<const BBox>, std::span<const BBox>)>
void BM_IouMatrix(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_boxes(n, 1), b = random_boxes(n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <void (*Fn)(std::span<const Polygon>, MaskRaster&)>
void BM_Rasterize(benchmark::State& state) {
    const auto polys = random_polygons(static_cast<std::size_t>(state.range(0)), 5);
    for (auto _ : state) {
        MaskRaster mask(1920, 1080);
        Fn(polys, mask);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * 1920 * 1080);
}

template <std::vector<FrameMatching> (*Fn)(std::span<const FrameOutput>, std::span<const std::vector<GTRecord>>, double)>
void BM_MatchSequence(benchmark::State& state) {
    const auto s = random_sequence(state.range(0), 40);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(s.preds, s.gt, kDefaultMatchIou));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_IouMatrix<reference::iou_matrix>)->Name("iou_matrix/serial")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_IouMatrix<kernels::iou_matrix>)->Name("iou_matrix/openmp")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_Rasterize<reference::rasterize>)->Name("rasterize/serial")->Arg(1)->Arg(8);
BENCHMARK(BM_Rasterize<kernels::rasterize>)->Name("rasterize/openmp")->Arg(1)->Arg(8);
BENCHMARK(BM_MatchSequence<reference::match_sequence>)->Name("match_sequence/serial")->Arg(300);
BENCHMARK(BM_MatchSequence<match_sequence>)->Name("match_sequence/openmp")->Arg(300);

BENCHMARK_MAIN();
