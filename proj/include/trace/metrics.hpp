#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trace/constants.hpp"
#include "trace/geometry.hpp"
#include "trace/linking.hpp"
#include "trace/pipeline.hpp"

namespace trace {

struct FrameGroundTruth {
    std::string video;
    long frame = 0;
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    BoundingBox subj_box;
    BoundingBox obj_box;

    friend bool operator==(const FrameGroundTruth&, const FrameGroundTruth&) = default;
};

struct VideoGroundTruth {
    std::string video;
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    Trajectory subj_traj;
    Trajectory obj_traj;

    friend bool operator==(const VideoGroundTruth&, const VideoGroundTruth&) = default;
};

// A localized frame-level triplet prediction.
struct FramePrediction {
    std::size_t subj_idx = 0;
    std::size_t obj_idx = 0;
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    double score = 0.0;
    BoundingBox subj_box;
    BoundingBox obj_box;
};

std::vector<FramePrediction> frame_predictions(const SceneGraph& graph);

struct FrameEval {
    std::string video;
    long frame = 0;
    std::vector<FramePrediction> predictions;
    std::vector<FrameGroundTruth> ground_truth;
};

// One entry per frame that has ground truth or predictions, ordered by (video, frame).
std::vector<FrameEval> collate_frames(std::span<const SceneGraph> graphs, std::span<const FrameGroundTruth> gt);

struct MetricReport {
    std::map<std::string, double> values;                               // fractions in [0, 1]
    std::map<std::string, std::map<std::size_t, double>> per_class;     // metric -> class -> value

    void merge(const MetricReport& other);
};

// Keeps the top `k_per_pair` predictions per (subj_idx, obj_idx), then the
// top `frame_limit` overall; result is score-descending.
std::vector<FramePrediction> cap_predictions(std::span<const FramePrediction> preds, std::size_t k_per_pair,
                                             std::size_t frame_limit);

// Greedy matching of score-ranked predictions: each prediction takes the first
// unmatched ground truth with equal classes and both box IoUs >= `hit_iou`.
// Returns, per prediction, the matched ground-truth index or -1.
std::vector<long> match_frame(std::span<const FramePrediction> ranked, std::span<const FrameGroundTruth> gt,
                              double hit_iou);

// VOC all-points AP: area under the precision envelope. `hits` is in rank order.
double average_precision(const std::vector<bool>& hits, std::size_t num_gt);

struct RecallOptions {
    std::size_t k = constants().recall_ks.value[1];
    std::size_t k_per_pair = constants().k_per_pair_frame_level.value[0];
    std::size_t frame_limit = constants().frame_triplet_limit.value;
    double hit_iou = constants().hit_iou.value;
};

// Keys: "R@K/image", "R@K/video", "mR@K/image", "mR@K/video"; per-class
// recalls under "mR@K/image".
MetricReport recall_suite(std::span<const FrameEval> frames, const RecallOptions& options);

// Keys: "mAP_rel", "wmAP_rel"; per-class AP under "AP_rel".
MetricReport ap_suite(std::span<const FrameEval> frames, std::size_t k_per_pair, std::size_t frame_limit,
                      double hit_iou);

struct VideoEval {
    std::string video;
    std::vector<VideoRelation> predictions;
    std::vector<VideoGroundTruth> ground_truth;
};

std::vector<VideoEval> collate_videos(std::span<const std::pair<std::string, VideoRelation>> preds,
                                      std::span<const VideoGroundTruth> gt);

// Keys: "video/mAP", "video/R@N" for each N in `recall_ns`.
MetricReport video_detection_eval(std::span<const VideoEval> videos, double viou_threshold,
                                  std::span<const std::size_t> recall_ns);

// Keys: "tag/P@K" for each K.
MetricReport tagging_precision(std::span<const VideoEval> videos, std::span<const std::size_t> ks);

}  // namespace trace
