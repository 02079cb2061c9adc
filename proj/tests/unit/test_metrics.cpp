#include <doctest.h>

#include <random>

#include "aiv/metrics.hpp"
#include "support.hpp"

using namespace aiv;
namespace at = aiv::testing;

namespace {

GTRecord g(std::int64_t frame, std::int64_t id, BBox b, VehicleClass c = VehicleClass::Car) { return {frame, id, c, b}; }
TrackOutput p(std::int64_t id, BBox b, VehicleClass c = VehicleClass::Car) { return make_output(id, c, b, 0.9); }

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("mota") {
        CHECK(*mota(0, 3, 1, 64) == 0.9375);
        CHECK(*mota(0, 2, 0, 63) == doctest::Approx(0.9683).epsilon(5e-5));
        CHECK(*mota(0, 0, 0, 10) == 1.0);
        CHECK_FALSE(mota(0, 0, 0, 0));
        CHECK(*mota(5, 5, 5, 5) < 0.0);  // can go negative
    }

    TEST_CASE("motp") {
        CHECK(*motp(61, 64) == doctest::Approx(0.953125));
        CHECK(*motp(61, 63) == doctest::Approx(0.9683).epsilon(5e-5));
        CHECK(*motp(7, 7) == 1.0);
        CHECK_FALSE(motp(0, 0));
    }

    TEST_CASE("prf1") {
        auto v2 = prf1(46, 0, 2);
        CHECK(*v2.precision == 1.0);
        CHECK(*v2.recall == doctest::Approx(0.9583).epsilon(5e-5));
        CHECK(*v2.f1 == doctest::Approx(0.9787).epsilon(5e-5));
        auto v1 = prf1(61, 2, 0);
        CHECK(*v1.precision == doctest::Approx(0.9683).epsilon(5e-5));
        CHECK(*v1.recall == 1.0);
        CHECK(*v1.f1 == doctest::Approx(0.9839).epsilon(5e-5));
        auto none = prf1(0, 0, 0);
        CHECK_FALSE(none.precision);
        CHECK_FALSE(none.recall);
        CHECK_FALSE(none.f1);
    }

    TEST_CASE("prf1 is scale invariant") {
        std::mt19937_64 rng(4);
        std::uniform_int_distribution<int> n(0, 50), k(1, 20);
        for (int i = 0; i < 500; ++i) {
            const int tp = n(rng), fp = n(rng), fn = n(rng), s = k(rng);
            const auto a = prf1(tp, fp, fn);
            const auto b = prf1(s * tp, s * fp, s * fn);
            CHECK(a.precision.has_value() == b.precision.has_value());
            CHECK(a.recall.has_value() == b.recall.has_value());
            CHECK(a.f1.has_value() == b.f1.has_value());
            if (a.precision) CHECK(*a.precision == doctest::Approx(*b.precision).epsilon(1e-12));
            if (a.recall) CHECK(*a.recall == doctest::Approx(*b.recall).epsilon(1e-12));
            if (a.f1) CHECK(*a.f1 == doctest::Approx(*b.f1).epsilon(1e-12));
        }
    }

    TEST_CASE("fpr and fnr") {
        CHECK(fpr_fnr(2, 0, 63, 10).fpr == doctest::Approx(0.0317).epsilon(5e-4));
        CHECK(fpr_fnr(0, 2, 10, 13).fnr == doctest::Approx(0.1538).epsilon(5e-4));
        CHECK(fpr_fnr(0, 3, 10, 7).fnr == doctest::Approx(0.4286).epsilon(5e-4));
        CHECK(fpr_fnr(0, 0, 0, 0).fpr == 0.0);
    }

    TEST_CASE("counting accuracy") {
        CHECK(round_half_up(*counting_accuracy(63, 61), 2) == 103.28);
        CHECK(round_half_up(*counting_accuracy(46, 48), 2) == 95.83);
        CHECK(round_half_up(*counting_accuracy(14, 21), 2) == 66.67);
        CHECK(*counting_accuracy(5, 5) == 100.0);
        CHECK_FALSE(counting_accuracy(3, 0));
        CHECK(round_half_up(2.675, 2) == 2.68);
        CHECK(round_half_up(0.9375, 3) == 0.938);
    }

    TEST_CASE("fps stats") {
        const std::vector<std::vector<double>> one{{0.025, 0.025, 0.025}};
        const auto a = fps_stats(one);
        CHECK(a.avg_min_fps == doctest::Approx(40));
        CHECK(a.avg_fps == doctest::Approx(40));
        CHECK(a.avg_max_fps == doctest::Approx(40));
        CHECK(a.fps_range == doctest::Approx(0));

        const std::vector<std::vector<double>> two{{1.0 / 20, 1.0 / 40, 1.0 / 30}, {1.0 / 30, 1.0 / 50}};
        const auto b = fps_stats(two);
        CHECK(b.avg_min_fps == doctest::Approx(25));
        CHECK(b.avg_max_fps == doctest::Approx(45));
        CHECK(b.fps_range == doctest::Approx(20));

        const std::vector<std::vector<double>> single{{0.1}};
        const auto c = fps_stats(single);
        CHECK(c.avg_min_fps == c.avg_fps);
        CHECK(c.avg_max_fps == c.avg_fps);
        CHECK_THROWS_AS(fps_stats(std::vector<std::vector<double>>{{0.0}}), MetricsError);
    }

    TEST_CASE("match_frame examples") {
        const std::vector<GTRecord> gt{g(0, 1, {0, 0, 10, 10}), g(0, 2, {50, 0, 10, 10})};
        const std::vector<TrackOutput> same{p(7, {0, 0, 10, 10}), p(8, {50, 0, 10, 10})};
        const auto m = match_frame(0, gt, same);
        REQUIRE(m.matches.size() == 2);
        CHECK(m.matches[0].iou == 1.0);
        CHECK(m.matches[1].track_id == 8);

        const std::vector<TrackOutput> far{p(7, {200, 200, 10, 10})};
        const auto d = match_frame(0, gt, far);
        CHECK(d.matches.empty());
        CHECK(d.unmatched_gt.size() == 2);
        CHECK(d.unmatched_pred == std::vector<std::int64_t>{7});

        // class-aware: a bus never matches a car
        const std::vector<TrackOutput> bus{p(9, {0, 0, 10, 10}, VehicleClass::Bus)};
        CHECK(match_frame(0, gt, bus).matches.empty());

        // iou exactly at the gate counts
        const std::vector<GTRecord> g1{g(0, 1, {0, 0, 10, 10})};
        const std::vector<TrackOutput> half{p(1, {0, 0, 10, 5})};
        CHECK(match_frame(0, g1, half).matches.size() == 1);
        CHECK(match_frame(0, g1, half, 0.51).matches.empty());

        CHECK_THROWS_AS(match_frame(1, gt, same), MetricsError);
    }

    TEST_CASE("2x2 matching equals the brute-force best pairing") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> pos(0, 20);
        for (int i = 0; i < 500; ++i) {
            const std::vector<GTRecord> gt{g(0, 1, {pos(rng), pos(rng), 20, 20}), g(0, 2, {pos(rng), pos(rng), 20, 20})};
            const std::vector<TrackOutput> pr{p(1, {pos(rng), pos(rng), 20, 20}), p(2, {pos(rng), pos(rng), 20, 20})};
            double o[2][2];
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) o[r][c] = iou(gt[r].box, pr[c].box);
            }
            // every matching of a 2x2 bipartite graph
            const std::vector<std::vector<std::pair<int, int>>> all{
                {}, {{0, 0}}, {{0, 1}}, {{1, 0}}, {{1, 1}}, {{0, 0}, {1, 1}}, {{0, 1}, {1, 0}}};
            std::size_t best_n = 0;
            double best_sum = 0.0;
            for (const auto& mset : all) {
                bool ok = true;
                double sum = 0.0;
                for (auto [r, c] : mset) {
                    ok = ok && o[r][c] >= 0.5;
                    sum += o[r][c];
                }
                if (!ok) continue;
                if (mset.size() > best_n || (mset.size() == best_n && sum > best_sum)) {
                    best_n = mset.size();
                    best_sum = sum;
                }
            }
            const auto m = match_frame(0, gt, pr);
            double sum = 0.0;
            for (const auto& mp : m.matches) sum += mp.iou;
            CHECK(m.matches.size() == best_n);
            CHECK(sum == doctest::Approx(best_sum).epsilon(1e-12));
        }
    }

    TEST_CASE("identity switches") {
        auto seq = [](std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> frames) {
            std::vector<FrameMatching> out;
            for (std::size_t f = 0; f < frames.size(); ++f) {
                FrameMatching m{static_cast<std::int64_t>(f), {}, {}, {}};
                for (auto [gid, tid] : frames[f]) m.matches.push_back({gid, tid, VehicleClass::Car, 1.0});
                out.push_back(m);
            }
            return out;
        };
        CHECK(count_ids(seq({{{1, 5}}, {{1, 5}}, {{1, 5}}})) == 0);
        CHECK(count_ids(seq({{{1, 5}}, {{1, 5}}, {{1, 6}}, {{1, 6}}})) == 1);
        // A<->B swap between two gt objects at frame 2
        const auto swap = seq({{{1, 10}, {2, 20}}, {{1, 10}, {2, 20}}, {{1, 20}, {2, 10}}, {{1, 20}, {2, 10}}});
        CHECK(count_ids(swap) == 2);
        CHECK(id_switches(swap) == std::vector<std::pair<std::int64_t, std::int64_t>>{{2, 1}, {2, 2}});
        // a gap in matching does not itself count
        CHECK(count_ids(seq({{{1, 5}}, {}, {{1, 5}}})) == 0);
    }

    TEST_CASE("perfect predictions give a perfect report") {
        const auto scene = at::make_linear_scene(21);
        const auto preds = at::gt_as_predictions(scene.gt, scene.frames);
        CountingEngine engine(scene.zones);
        for (const auto& f : preds) engine.consume(f);
        EvalOptions opts;
        opts.ledger = &engine.ledger();
        const auto rep = evaluate(preds, scene.gt, opts);
        CHECK(*rep.overall.mota == 1.0);
        CHECK(*rep.overall.motp == 1.0);
        CHECK(rep.overall.ids == 0);
        CHECK(*rep.overall.prf.precision == 1.0);
        CHECK(*rep.overall.prf.recall == 1.0);
        CHECK(*rep.overall.prf.f1 == 1.0);
        for (const auto& [cls, m] : rep.per_class) CHECK(*m.counting_accuracy_pct == 100.0);
        CHECK(rep.to_json().contains("per_class"));
        CHECK_FALSE(rep.to_table().empty());
    }

    TEST_CASE("invariants on perturbed predictions") {
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> jitter(-6, 6);
        std::bernoulli_distribution drop(0.1), ghost(0.05), relabel(0.02);
        const auto scene = at::make_linear_scene(5);
        for (int trial = 0; trial < 5; ++trial) {
            auto preds = at::gt_as_predictions(scene.gt, scene.frames);
            std::int64_t next_id = 1000;
            for (auto& f : preds) {
                std::vector<TrackOutput> kept;
                for (auto t : f.tracks) {
                    if (drop(rng)) continue;
                    if (relabel(rng)) t.track_id = next_id++;
                    t.box.x += jitter(rng);
                    t.box.y += jitter(rng);
                    kept.push_back(t);
                }
                if (ghost(rng)) kept.push_back(p(next_id++, {1000, 600, 30, 30}));
                std::sort(kept.begin(), kept.end(), [](auto& a, auto& b) { return a.track_id < b.track_id; });
                f.tracks = kept;
            }
            EvalOptions serial;
            serial.parallel = false;
            const auto rep = evaluate(preds, scene.gt);
            const auto rep_serial = evaluate(preds, scene.gt, serial);
            CHECK(rep.to_json() == rep_serial.to_json());

            auto check = [&](const ClassMetrics& m) {
                CHECK(m.tp + m.fn == m.gt_total);
                CHECK(m.tp + m.fp == m.pred_total);
                if (m.mota) CHECK(*m.mota <= 1.0);
                if (m.motp) {
                    CHECK(*m.motp >= 0.5);
                    CHECK(*m.motp <= 1.0);
                }
            };
            check(rep.overall);
            for (const auto& [cls, m] : rep.per_class) check(m);
            CHECK(*rep.overall.mota < 1.0);
        }
    }

    TEST_CASE("parallel matching equals the serial reference") {
        const auto scene = at::make_linear_scene(9);
        const auto preds = at::track_stream(scene.detections, TrackerParams{}, scene.frames);
        std::vector<std::vector<GTRecord>> by_frame(static_cast<std::size_t>(scene.frames));
        for (const auto& r : scene.gt.records) by_frame[static_cast<std::size_t>(r.frame)].push_back(r);
        CHECK(match_sequence(preds, by_frame, 0.5) == reference::match_sequence(preds, by_frame, 0.5));
    }

    TEST_CASE("gt beyond the prediction range is an error") {
        GTStream gt;
        gt.records.push_back(g(5, 1, {0, 0, 10, 10}));
        const std::vector<FrameOutput> preds(3);
        CHECK_THROWS_AS(evaluate(preds, gt), MetricsError);
    }
}
