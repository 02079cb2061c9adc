#include "aiv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "aiv/assignment.hpp"

namespace aiv {

FrameMatching match_frame(std::int64_t frame, std::span<const GTRecord> gt, std::span<const TrackOutput> preds,
                          double iou_min) {
    std::vector<const GTRecord*> rows;
    std::vector<const TrackOutput*> cols;
    for (const auto& g : gt) {
        if (g.frame != frame) {
            throw MetricsError("ground truth for frame " + std::to_string(g.frame) + " passed as frame " +
                               std::to_string(frame));
        }
        rows.push_back(&g);
    }
    for (const auto& p : preds) cols.push_back(&p);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->gt_id < b->gt_id; });
    std::sort(cols.begin(), cols.end(), [](auto* a, auto* b) { return a->track_id < b->track_id; });

    FrameMatching out;
    out.frame = frame;
    Matrix cost(rows.size(), cols.size(), 1.0);
    std::vector<std::uint8_t> feasible(rows.size() * cols.size(), 0);
    Matrix ious(rows.size(), cols.size(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (rows[r]->cls != cols[c]->cls) continue;
            const double v = iou(rows[r]->box, cols[c]->box);
            if (v >= iou_min) {
                ious(r, c) = v;
                cost(r, c) = 1.0 - v;
                feasible[r * cols.size() + c] = 1;
            }
        }
    }
    const AssignmentResult res = solve_assignment(cost, feasible);
    for (auto [r, c] : res.matches) {
        out.matches.push_back({rows[r]->gt_id, cols[c]->track_id, rows[r]->cls, ious(r, c)});
    }
    for (auto r : res.unmatched_rows) out.unmatched_gt.push_back(rows[r]->gt_id);
    for (auto c : res.unmatched_cols) out.unmatched_pred.push_back(cols[c]->track_id);
    return out;
}

std::optional<double> mota(std::int64_t fn, std::int64_t fp, std::int64_t ids, std::int64_t denom) {
    if (denom <= 0) return std::nullopt;
    return 1.0 - static_cast<double>(fn + fp + ids) / static_cast<double>(denom);
}

std::optional<double> motp(double sum_iou, std::int64_t matches) {
    if (matches <= 0) return std::nullopt;
    return sum_iou / static_cast<double>(matches);
}

std::vector<std::pair<std::int64_t, std::int64_t>> id_switches(std::span<const FrameMatching> matchings) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    std::unordered_map<std::int64_t, std::int64_t> last;
    for (const auto& m : matchings) {
        for (const auto& pair : m.matches) {
            auto [it, fresh] = last.try_emplace(pair.gt_id, pair.track_id);
            if (!fresh && it->second != pair.track_id) {
                out.emplace_back(m.frame, pair.gt_id);
                it->second = pair.track_id;
            }
        }
    }
    return out;
}

std::int64_t count_ids(std::span<const FrameMatching> matchings) {
    return static_cast<std::int64_t>(id_switches(matchings).size());
}

PRF1 prf1(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    PRF1 out;
    if (tp + fp > 0) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (out.precision && out.recall) {
        const double s = *out.precision + *out.recall;
        out.f1 = s > 0.0 ? 2.0 * *out.precision * *out.recall / s : 0.0;
    }
    return out;
}

FprFnr fpr_fnr(std::int64_t fp, std::int64_t fn, std::int64_t detections_total, std::int64_t gt_total) {
    FprFnr out;
    if (detections_total > 0) out.fpr = static_cast<double>(fp) / static_cast<double>(detections_total);
    if (gt_total > 0) out.fnr = static_cast<double>(fn) / static_cast<double>(gt_total);
    return out;
}

std::optional<double> counting_accuracy(std::int64_t detected, std::int64_t gt_count) {
    if (gt_count <= 0) return std::nullopt;
    return 100.0 * static_cast<double>(detected) / static_cast<double>(gt_count);
}

FpsStats fps_stats(std::span<const std::vector<double>> runs) {
    if (runs.empty()) throw MetricsError("fps_stats needs at least one run");
    FpsStats s;
    for (const auto& durations : runs) {
        if (durations.empty()) throw MetricsError("fps_stats: empty duration series");
        std::vector<double> fps;
        fps.reserve(durations.size());
        for (double d : durations) {
            if (!(d > 0.0) || !std::isfinite(d)) throw MetricsError("fps_stats: frame durations must be positive");
            fps.push_back(1.0 / d);
        }
        const auto [lo, hi] = std::minmax_element(fps.begin(), fps.end());
        s.avg_min_fps += *lo;
        s.avg_max_fps += *hi;
        s.avg_fps += std::accumulate(fps.begin(), fps.end(), 0.0) / static_cast<double>(fps.size());
        s.per_frame_fps.push_back(std::move(fps));
    }
    const auto n = static_cast<double>(runs.size());
    s.avg_min_fps /= n;
    s.avg_fps /= n;
    s.avg_max_fps /= n;
    s.fps_range = s.avg_max_fps - s.avg_min_fps;
    return s;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::vector<FrameMatching> match_serial(std::span<const FrameOutput> predictions,
                                        std::span<const std::vector<GTRecord>> gt_by_frame, double iou_min) {
    std::vector<FrameMatching> out(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        std::span<const GTRecord> gt = i < gt_by_frame.size() ? std::span<const GTRecord>(gt_by_frame[i])
                                                              : std::span<const GTRecord>();
        out[i] = match_frame(predictions[i].frame, gt, predictions[i].tracks, iou_min);
    }
    return out;
}

void finish(ClassMetrics& m) {
    m.mota = mota(m.fn, m.fp, m.ids, m.gt_total);
    m.mota_compat = mota(m.fn, m.fp, m.ids, m.matches);
    m.motp = motp(m.sum_iou, m.matches);
    m.prf = prf1(m.tp, m.fp, m.fn);
    m.rates = fpr_fnr(m.fp, m.fn, m.pred_total, m.gt_total);
    if (m.counted) m.counting_accuracy_pct = counting_accuracy(*m.counted, m.gt_vehicles);
}

}  // namespace

std::vector<FrameMatching> match_sequence(std::span<const FrameOutput> predictions,
                                          std::span<const std::vector<GTRecord>> gt_by_frame, double iou_min) {
    std::vector<FrameMatching> out(predictions.size());
    const auto n = static_cast<std::int64_t>(predictions.size());
    // exceptions may not leave a parallel region; keep the first and rethrow
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        std::span<const GTRecord> gt = k < gt_by_frame.size() ? std::span<const GTRecord>(gt_by_frame[k])
                                                              : std::span<const GTRecord>();
        try {
            out[k] = match_frame(predictions[k].frame, gt, predictions[k].tracks, iou_min);
        } catch (...) {
#pragma omp critical(aiv_match_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

namespace reference {
std::vector<FrameMatching> match_sequence(std::span<const FrameOutput> predictions,
                                          std::span<const std::vector<GTRecord>> gt_by_frame, double iou_min) {
    return match_serial(predictions, gt_by_frame, iou_min);
}
}  // namespace reference

EvalReport evaluate(std::span<const FrameOutput> predictions, const GTStream& gt, const EvalOptions& options) {
    const auto frames = static_cast<std::int64_t>(predictions.size());
    for (std::int64_t i = 0; i < frames; ++i) {
        if (predictions[static_cast<std::size_t>(i)].frame != i) {
            throw MetricsError("predictions must be dense and frame-ordered");
        }
    }
    std::vector<std::vector<GTRecord>> gt_by_frame(static_cast<std::size_t>(frames));
    std::map<VehicleClass, std::set<std::int64_t>> vehicles;
    for (const auto& g : gt.records) {
        if (g.frame < 0 || g.frame >= frames) {
            throw MetricsError("ground truth frame " + std::to_string(g.frame) + " is outside the " +
                               std::to_string(frames) + "-frame sequence");
        }
        gt_by_frame[static_cast<std::size_t>(g.frame)].push_back(g);
        vehicles[g.cls].insert(g.gt_id);
    }

    const auto matchings = options.parallel ? match_sequence(predictions, gt_by_frame, options.iou_min)
                                            : reference::match_sequence(predictions, gt_by_frame, options.iou_min);

    EvalReport report;
    report.frames = frames;
    report.iou_min = options.iou_min;
    if (options.count_method) report.count_method = std::string(method_name(*options.count_method));

    for (std::size_t i = 0; i < matchings.size(); ++i) {
        const auto& fm = matchings[i];
        std::unordered_map<std::int64_t, VehicleClass> gt_cls;
        std::unordered_map<std::int64_t, VehicleClass> pred_cls;
        for (const auto& g : gt_by_frame[i]) {
            gt_cls[g.gt_id] = g.cls;
            report.per_class[g.cls].gt_total += 1;
        }
        for (const auto& p : predictions[i].tracks) {
            pred_cls[p.track_id] = p.cls;
            report.per_class[p.cls].pred_total += 1;
        }
        for (const auto& m : fm.matches) {
            auto& c = report.per_class[m.cls];
            c.tp += 1;
            c.matches += 1;
            c.sum_iou += m.iou;
        }
        for (auto id : fm.unmatched_gt) report.per_class[gt_cls.at(id)].fn += 1;
        for (auto id : fm.unmatched_pred) report.per_class[pred_cls.at(id)].fp += 1;
    }

    std::unordered_map<std::int64_t, VehicleClass> class_of_gt;
    for (const auto& g : gt.records) class_of_gt[g.gt_id] = g.cls;
    for (const auto& [frame, gt_id] : id_switches(matchings)) report.per_class[class_of_gt.at(gt_id)].ids += 1;

    for (const auto& [cls, ids] : vehicles) report.per_class[cls].gt_vehicles = static_cast<std::int64_t>(ids.size());
    if (options.ledger) {
        for (const auto& e : options.ledger->events()) report.per_class[e.cls];  // make counted-only classes visible
        for (auto& [cls, m] : report.per_class) {
            m.counted = options.count_method ? options.ledger->total(cls, *options.count_method)
                                             : options.ledger->total(cls);
        }
    }

    ClassMetrics& all = report.overall;
    for (auto& [cls, m] : report.per_class) {
        finish(m);
        all.gt_total += m.gt_total;
        all.pred_total += m.pred_total;
        all.tp += m.tp;
        all.fp += m.fp;
        all.fn += m.fn;
        all.ids += m.ids;
        all.matches += m.matches;
        all.sum_iou += m.sum_iou;
        all.gt_vehicles += m.gt_vehicles;
        if (m.counted) all.counted = all.counted.value_or(0) + *m.counted;
    }
    finish(all);
    return report;
}

double round_half_up(double v, int digits) {
    const double scale = std::pow(10.0, digits);
    const double scaled = v * scale;
    // Nudge values that are a representation error away from the half point.
    return std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, std::abs(scaled))) / scale;
}

nlohmann::json FpsStats::to_json() const {
    return {{"avg_min_fps", avg_min_fps},
            {"avg_fps", avg_fps},
            {"avg_max_fps", avg_max_fps},
            {"fps_range", fps_range},
            {"per_frame_fps", per_frame_fps}};
}

nlohmann::json ClassMetrics::to_json() const {
    return {{"gt_total", gt_total},
            {"pred_total", pred_total},
            {"tp", tp},
            {"fp", fp},
            {"fn", fn},
            {"ids", ids},
            {"total_matches", matches},
            {"sum_iou", sum_iou},
            {"mota", opt(mota)},
            {"mota_compat", opt(mota_compat)},
            {"motp", opt(motp)},
            {"precision", opt(prf.precision)},
            {"recall", opt(prf.recall)},
            {"f1", opt(prf.f1)},
            {"fpr", rates.fpr},
            {"fnr", rates.fnr},
            {"gt_vehicles", gt_vehicles},
            {"counted", counted ? nlohmann::json(*counted) : nlohmann::json(nullptr)},
            {"counting_accuracy_pct", opt(counting_accuracy_pct)}};
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [cls, m] : per_class) classes[std::string(class_name(cls))] = m.to_json();
    nlohmann::json j = {{"frames", frames},
                        {"iou_min", iou_min},
                        {"per_class", std::move(classes)},
                        {"overall", overall.to_json()}};
    j["count_method"] = count_method ? nlohmann::json(*count_method) : nlohmann::json(nullptr);
    if (fps) j["fps"] = fps->to_json();
    return j;
}

namespace {

std::string fixed(std::optional<double> v, int digits) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, round_half_up(*v, digits));
    return buf;
}

}  // namespace

std::string EvalReport::to_table() const {
    const std::vector<std::string> head = {"Class", "GT", "Det", "TP",   "FP",  "FN", "IDS", "MOTA", "MOTA(m)",
                                           "MOTP",  "FPR", "FNR", "Prec", "Rec", "F1", "Count", "Acc(%)"};
    std::vector<std::vector<std::string>> rows;
    auto row = [&](const std::string& name, const ClassMetrics& m) {
        rows.push_back({name,
                        std::to_string(m.gt_total),
                        std::to_string(m.pred_total),
                        std::to_string(m.tp),
                        std::to_string(m.fp),
                        std::to_string(m.fn),
                        std::to_string(m.ids),
                        fixed(m.mota, 4),
                        fixed(m.mota_compat, 4),
                        fixed(m.motp, 3),
                        fixed(m.rates.fpr, 3),
                        fixed(m.rates.fnr, 3),
                        fixed(m.prf.precision, 2),
                        fixed(m.prf.recall, 2),
                        fixed(m.prf.f1, 2),
                        m.counted ? std::to_string(*m.counted) + "/" + std::to_string(m.gt_vehicles) : "",
                        fixed(m.counting_accuracy_pct, 2)});
    };
    for (const auto& [cls, m] : per_class) row(std::string(class_name(cls)), m);
    row("all", overall);

    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == 0) {
                out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
            } else {
                out << "  " << std::string(width[c] - cells[c].size(), ' ') << cells[c];
            }
        }
        out << '\n';
    };
    emit(head);
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    out << std::string(total - 2, '-') << '\n';
    for (const auto& r : rows) emit(r);
    return out.str();
}

}  // namespace aiv
