#include "trace/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "trace/errors.hpp"

namespace trace {
namespace {

bool prediction_before(const FramePrediction& a, const FramePrediction& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.subj_idx, a.obj_idx, a.rel_class) < std::tie(b.subj_idx, b.obj_idx, b.rel_class);
}

bool same_classes(const FramePrediction& p, const FrameGroundTruth& g) noexcept {
    return p.subj_class == g.subj_class && p.obj_class == g.obj_class && p.rel_class == g.rel_class;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string key_with_k(const char* base, std::size_t k, const char* suffix) {
    return std::string(base) + "@" + std::to_string(k) + suffix;
}

struct FrameRecall {
    double overall = 0.0;
    std::map<std::size_t, double> per_class;  // only classes present in the frame's GT
};

FrameRecall frame_recall(const FrameEval& f, const RecallOptions& o) {
    std::vector<FramePrediction> ranked = cap_predictions(f.predictions, o.k_per_pair, o.frame_limit);
    if (ranked.size() > o.k) ranked.resize(o.k);
    const std::vector<long> match = match_frame(ranked, f.ground_truth, o.hit_iou);

    std::vector<bool> gt_hit(f.ground_truth.size(), false);
    for (long m : match)
        if (m >= 0) gt_hit[static_cast<std::size_t>(m)] = true;

    FrameRecall out;
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> by_class;  // rel -> (hit, total)
    std::size_t hits = 0;
    for (std::size_t g = 0; g < f.ground_truth.size(); ++g) {
        auto& c = by_class[f.ground_truth[g].rel_class];
        c.second += 1;
        if (gt_hit[g]) {
            ++hits;
            c.first += 1;
        }
    }
    out.overall = static_cast<double>(hits) / static_cast<double>(f.ground_truth.size());
    for (const auto& [rel, c] : by_class)
        out.per_class[rel] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return out;
}

// Mean over classes of the per-class mean over frames.
double mean_recall(const std::vector<const FrameRecall*>& frames, std::map<std::size_t, double>* per_class) {
    std::map<std::size_t, std::vector<double>> acc;
    for (const FrameRecall* f : frames)
        for (const auto& [rel, r] : f->per_class) acc[rel].push_back(r);
    std::vector<double> class_means;
    for (const auto& [rel, v] : acc) {
        class_means.push_back(mean(v));
        if (per_class) (*per_class)[rel] = class_means.back();
    }
    return mean(class_means);
}

}  // namespace

void MetricReport::merge(const MetricReport& other) {
    for (const auto& [k, v] : other.values) values[k] = v;
    for (const auto& [k, v] : other.per_class) per_class[k] = v;
}

std::vector<FramePrediction> frame_predictions(const SceneGraph& graph) {
    std::vector<FramePrediction> out;
    out.reserve(graph.triplets.size());
    for (const TripletPrediction& t : graph.triplets) {
        FramePrediction p;
        p.subj_idx = t.subj_idx;
        p.obj_idx = t.obj_idx;
        p.subj_class = t.subj_class;
        p.obj_class = t.obj_class;
        p.rel_class = t.rel_class;
        p.score = t.score;
        p.subj_box = graph.detections.at(t.subj_idx).box;
        p.obj_box = graph.detections.at(t.obj_idx).box;
        out.push_back(p);
    }
    return out;
}

std::vector<FrameEval> collate_frames(std::span<const SceneGraph> graphs, std::span<const FrameGroundTruth> gt) {
    std::map<std::pair<std::string, long>, FrameEval> frames;
    for (const SceneGraph& g : graphs) {
        FrameEval& f = frames[{g.video, g.frame}];
        f.video = g.video;
        f.frame = g.frame;
        const auto preds = frame_predictions(g);
        f.predictions.insert(f.predictions.end(), preds.begin(), preds.end());
    }
    for (const FrameGroundTruth& t : gt) {
        FrameEval& f = frames[{t.video, t.frame}];
        f.video = t.video;
        f.frame = t.frame;
        f.ground_truth.push_back(t);
    }
    std::vector<FrameEval> out;
    for (auto& [key, f] : frames) out.push_back(std::move(f));
    return out;
}

std::vector<FramePrediction> cap_predictions(std::span<const FramePrediction> preds, std::size_t k_per_pair,
                                             std::size_t frame_limit) {
    std::vector<FramePrediction> sorted(preds.begin(), preds.end());
    std::sort(sorted.begin(), sorted.end(), prediction_before);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> per_pair;
    std::vector<FramePrediction> out;
    for (const FramePrediction& p : sorted) {
        if (out.size() >= frame_limit) break;
        std::size_t& n = per_pair[{p.subj_idx, p.obj_idx}];
        if (n >= k_per_pair) continue;
        ++n;
        out.push_back(p);
    }
    return out;
}

std::vector<long> match_frame(std::span<const FramePrediction> ranked, std::span<const FrameGroundTruth> gt,
                              double hit_iou) {
    std::vector<bool> used(gt.size(), false);
    std::vector<long> out(ranked.size(), -1);
    for (std::size_t p = 0; p < ranked.size(); ++p) {
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (used[g] || !same_classes(ranked[p], gt[g])) continue;
            if (iou(ranked[p].subj_box, gt[g].subj_box) < hit_iou) continue;
            if (iou(ranked[p].obj_box, gt[g].obj_box) < hit_iou) continue;
            used[g] = true;
            out[p] = static_cast<long>(g);
            break;
        }
    }
    return out;
}

double average_precision(const std::vector<bool>& hits, std::size_t num_gt) {
    if (num_gt == 0) return 0.0;
    std::vector<double> recall{0.0};
    std::vector<double> precision{0.0};
    std::size_t tp = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (hits[i]) ++tp;
        recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    recall.push_back(1.0);
    precision.push_back(0.0);
    for (std::size_t i = precision.size() - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    for (std::size_t i = 1; i < recall.size(); ++i)
        if (recall[i] != recall[i - 1]) ap += (recall[i] - recall[i - 1]) * precision[i];
    return ap;
}

MetricReport recall_suite(std::span<const FrameEval> frames, const RecallOptions& options) {
    std::vector<FrameRecall> recalls;
    std::vector<std::string> videos;
    for (const FrameEval& f : frames) {
        if (f.ground_truth.empty()) continue;
        recalls.push_back(frame_recall(f, options));
        videos.push_back(f.video);
    }

    MetricReport report;
    const std::string r_img = key_with_k("R", options.k, "/image");
    const std::string r_vid = key_with_k("R", options.k, "/video");
    const std::string mr_img = key_with_k("mR", options.k, "/image");
    const std::string mr_vid = key_with_k("mR", options.k, "/video");

    std::vector<double> overall;
    std::vector<const FrameRecall*> all;
    std::map<std::string, std::vector<const FrameRecall*>> by_video;
    for (std::size_t i = 0; i < recalls.size(); ++i) {
        overall.push_back(recalls[i].overall);
        all.push_back(&recalls[i]);
        by_video[videos[i]].push_back(&recalls[i]);
    }
    report.values[r_img] = mean(overall);
    report.values[mr_img] = mean_recall(all, &report.per_class[mr_img]);

    std::vector<double> video_r, video_mr;
    for (const auto& [video, fr] : by_video) {
        std::vector<double> v;
        for (const FrameRecall* f : fr) v.push_back(f->overall);
        video_r.push_back(mean(v));
        video_mr.push_back(mean_recall(fr, nullptr));
    }
    report.values[r_vid] = mean(video_r);
    report.values[mr_vid] = mean(video_mr);
    return report;
}

MetricReport ap_suite(std::span<const FrameEval> frames, std::size_t k_per_pair, std::size_t frame_limit,
                      double hit_iou) {
    struct Entry {
        std::size_t frame;
        FramePrediction pred;
    };
    std::map<std::size_t, std::vector<Entry>> pooled;
    std::map<std::size_t, std::size_t> gt_count;
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        for (const FramePrediction& p : cap_predictions(frames[fi].predictions, k_per_pair, frame_limit))
            pooled[p.rel_class].push_back({fi, p});
        for (const FrameGroundTruth& g : frames[fi].ground_truth) gt_count[g.rel_class] += 1;
    }

    MetricReport report;
    auto& per_class = report.per_class["AP_rel"];
    double sum = 0.0;
    double weighted = 0.0;
    std::size_t total_gt = 0;
    for (const auto& [rel, n_gt] : gt_count) {
        std::vector<Entry>& entries = pooled[rel];
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.pred.score != b.pred.score) return a.pred.score > b.pred.score;
            if (a.frame != b.frame) return a.frame < b.frame;
            return std::tie(a.pred.subj_idx, a.pred.obj_idx) < std::tie(b.pred.subj_idx, b.pred.obj_idx);
        });
        std::map<std::size_t, std::vector<bool>> used;
        std::vector<bool> hits;
        for (const Entry& e : entries) {
            const auto& gt = frames[e.frame].ground_truth;
            auto& u = used[e.frame];
            if (u.empty()) u.assign(gt.size(), false);
            bool hit = false;
            for (std::size_t g = 0; g < gt.size(); ++g) {
                if (u[g] || !same_classes(e.pred, gt[g])) continue;
                if (iou(e.pred.subj_box, gt[g].subj_box) < hit_iou || iou(e.pred.obj_box, gt[g].obj_box) < hit_iou)
                    continue;
                u[g] = true;
                hit = true;
                break;
            }
            hits.push_back(hit);
        }
        const double ap = average_precision(hits, n_gt);
        per_class[rel] = ap;
        sum += ap;
        weighted += ap * static_cast<double>(n_gt);
        total_gt += n_gt;
    }
    report.values["mAP_rel"] = gt_count.empty() ? 0.0 : sum / static_cast<double>(gt_count.size());
    report.values["wmAP_rel"] = total_gt == 0 ? 0.0 : weighted / static_cast<double>(total_gt);
    return report;
}

std::vector<VideoEval> collate_videos(std::span<const std::pair<std::string, VideoRelation>> preds,
                                      std::span<const VideoGroundTruth> gt) {
    std::map<std::string, VideoEval> videos;
    for (const auto& [video, rel] : preds) {
        VideoEval& v = videos[video];
        v.video = video;
        v.predictions.push_back(rel);
    }
    for (const VideoGroundTruth& g : gt) {
        VideoEval& v = videos[g.video];
        v.video = g.video;
        v.ground_truth.push_back(g);
    }
    std::vector<VideoEval> out;
    for (auto& [k, v] : videos) out.push_back(std::move(v));
    return out;
}

namespace {

std::vector<std::size_t> rank_relations(const std::vector<VideoRelation>& preds) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const VideoRelation& x = preds[a];
        const VideoRelation& y = preds[b];
        if (x.score != y.score) return x.score > y.score;
        return std::tie(x.subj_class, x.rel_class, x.obj_class) < std::tie(y.subj_class, y.rel_class, y.obj_class);
    });
    return order;
}

}  // namespace

MetricReport video_detection_eval(std::span<const VideoEval> videos, double viou_threshold,
                                  std::span<const std::size_t> recall_ns) {
    std::vector<double> aps;
    std::map<std::size_t, std::vector<double>> recalls;
    for (const VideoEval& v : videos) {
        if (v.ground_truth.empty()) continue;
        const std::vector<std::size_t> order = rank_relations(v.predictions);
        std::vector<bool> used(v.ground_truth.size(), false);
        std::vector<bool> hits;
        for (std::size_t idx : order) {
            const VideoRelation& p = v.predictions[idx];
            bool hit = false;
            for (std::size_t g = 0; g < v.ground_truth.size(); ++g) {
                const VideoGroundTruth& gt = v.ground_truth[g];
                if (used[g] || p.subj_class != gt.subj_class || p.obj_class != gt.obj_class ||
                    p.rel_class != gt.rel_class)
                    continue;
                if (viou(p.subj_traj, gt.subj_traj) < viou_threshold || viou(p.obj_traj, gt.obj_traj) < viou_threshold)
                    continue;
                used[g] = true;
                hit = true;
                break;
            }
            hits.push_back(hit);
        }
        aps.push_back(average_precision(hits, v.ground_truth.size()));
        for (std::size_t n : recall_ns) {
            const std::size_t upto = std::min(n, hits.size());
            const auto matched = static_cast<std::size_t>(std::count(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(upto), true));
            recalls[n].push_back(static_cast<double>(matched) / static_cast<double>(v.ground_truth.size()));
        }
    }
    MetricReport report;
    report.values["video/mAP"] = mean(aps);
    for (std::size_t n : recall_ns) report.values["video/R@" + std::to_string(n)] = mean(recalls[n]);
    return report;
}

MetricReport tagging_precision(std::span<const VideoEval> videos, std::span<const std::size_t> ks) {
    using Category = std::tuple<std::size_t, std::size_t, std::size_t>;  // (subj, rel, obj)
    std::map<std::size_t, std::vector<double>> precisions;
    for (const VideoEval& v : videos) {
        if (v.ground_truth.empty()) continue;
        std::map<Category, double> best;
        for (const VideoRelation& p : v.predictions) {
            const Category c{p.subj_class, p.rel_class, p.obj_class};
            auto it = best.find(c);
            if (it == best.end() || p.score > it->second) best[c] = p.score;
        }
        std::vector<std::pair<Category, double>> ranked(best.begin(), best.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        std::set<Category> truth;
        for (const VideoGroundTruth& g : v.ground_truth) truth.insert({g.subj_class, g.rel_class, g.obj_class});
        for (std::size_t k : ks) {
            if (k == 0) throw PreconditionError("tagging_precision: K must be positive");
            std::size_t hits = 0;
            for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) hits += truth.count(ranked[i].first);
            precisions[k].push_back(static_cast<double>(hits) / static_cast<double>(k));
        }
    }
    MetricReport report;
    for (std::size_t k : ks) report.values["tag/P@" + std::to_string(k)] = mean(precisions[k]);
    return report;
}

}  // namespace trace
