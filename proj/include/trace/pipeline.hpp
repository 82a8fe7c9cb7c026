#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trace/config.hpp"
#include "trace/contextagg.hpp"
#include "trace/geometry.hpp"
#include "trace/hrtree.hpp"
#include "trace/relhead.hpp"
#include "trace/tensor.hpp"

namespace trace {

using IndexPair = std::pair<std::size_t, std::size_t>;

// Learned parameters and tables shared by every frame.
struct Model {
    WeightStore weights;
    EmbeddingTable embedding;
    FrequencyTable frequency;
};

// Widths implied by the weight store.
struct ModelDims {
    std::size_t object_classes = 0;
    std::size_t relation_classes = 0;
    std::size_t detection_feature = 0;
    std::size_t node = 0;
    std::size_t grid_channels = 0;
    std::size_t volume_channels = 0;
    std::size_t reduced = 0;
    std::size_t embedding = 0;
};

// Checks every parameter the configured head needs, with shapes, and returns
// the implied widths. Throws ConfigError naming the first offending parameter.
ModelDims validate_model(const Model& model, const Config& config);

struct FrameInput {
    std::string video;
    long frame = 0;
    double frame_width = 1.0;
    double frame_height = 1.0;
    std::vector<Detection> detections;
    std::vector<Vec> detection_features;                 // parallel to detections
    std::optional<std::vector<std::size_t>> labels;      // ground-truth classes
    std::optional<std::vector<IndexPair>> pairs;         // ground-truth candidate pairs
    FeatureGrid grid;
    FeatureVolume volume;
};

struct TripletPrediction {
    std::size_t subj_idx = 0;
    std::size_t obj_idx = 0;
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    double score = 0.0;

    friend bool operator==(const TripletPrediction&, const TripletPrediction&) = default;
};

struct SceneGraph {
    std::string video;
    long frame = 0;
    std::vector<Detection> detections;
    std::vector<std::size_t> source_indices;  // input index of each kept detection
    std::vector<std::size_t> classes;         // class used for each kept detection
    std::vector<TripletPrediction> triplets;  // descending score

    friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

// Score-descending order with ties by (subj_idx, obj_idx, rel_class).
bool triplet_before(const TripletPrediction& a, const TripletPrediction& b) noexcept;

// Ordered pairs i != j; with `overlap_only`, only pairs whose boxes intersect
// with positive area.
std::vector<IndexPair> enumerate_pairs(std::span<const Detection> dets, bool overlap_only);

// Everything computed once per frame before pairs are scored.
struct FrameContext {
    std::vector<Detection> detections;
    std::vector<std::size_t> source_indices;
    std::vector<std::size_t> classes;
    std::vector<Vec> class_scores;  // one-hot in PredCls
    HRTree tree;
    NodeFeatures node_inputs;
    NodeFeatures contextual;
    std::vector<IndexPair> pairs;
};

FrameContext prepare_frame(const FrameInput& frame, const Model& model, const Config& config);

NodeFeatures node_input_features(const FrameInput& frame, const HRTree& tree, std::span<const std::size_t> kept,
                                 const Model& model, const Config& config);

// Four branch logits for the pair (subject i, object j) of a prepared frame.
std::vector<BranchLogits> pair_branches(const FrameContext& ctx, const FrameInput& frame, const Model& model,
                                        const Config& config, std::size_t i, std::size_t j);

SceneGraph generate_frame_graph(const FrameInput& frame, const Model& model, const Config& config);

}  // namespace trace
