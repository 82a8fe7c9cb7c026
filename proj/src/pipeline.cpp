#include "trace/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "trace/errors.hpp"
#include "trace/kernels.hpp"

namespace trace {
namespace {

void check_linear(const WeightStore& w, const std::string& prefix, std::size_t out, std::size_t in, bool bias = true) {
    w.get(prefix + ".weight", {out, in});
    if (bias) w.get(prefix + ".bias", {out});
}

void check_gru(const WeightStore& w, const std::string& prefix, std::size_t in, std::size_t hidden) {
    for (const char* gate : {"z", "r", "h"}) {
        const std::string g(gate);
        w.get(prefix + ".W" + g, {hidden, in});
        w.get(prefix + ".U" + g, {hidden, hidden});
        w.get(prefix + ".b" + g, {hidden});
    }
}

std::size_t cols_of(const WeightStore& w, const std::string& name) {
    const Tensor& t = w.get(name);
    if (t.rank() != 2) throw ConfigError("weights: parameter '" + name + "' must be rank 2");
    return t.dim(1);
}

}  // namespace

ModelDims validate_model(const Model& model, const Config& config) {
    config.validate();
    const WeightStore& w = model.weights;
    ModelDims d;
    if (model.embedding.matrix.rank() != 2) throw ConfigError("embedding: table must be [classes x width]");
    d.object_classes = model.embedding.classes();
    d.embedding = model.embedding.width();
    d.relation_classes = model.frequency.relation_classes();
    if (model.frequency.object_classes() != d.object_classes)
        throw ConfigError("frequency table covers " + std::to_string(model.frequency.object_classes()) +
                          " object classes, embedding table " + std::to_string(d.object_classes));
    if (d.relation_classes == 0) throw ConfigError("frequency table: no relation classes");

    d.node = linear_out_dim(w, "leaf.proj");
    d.detection_feature = cols_of(w, "leaf.proj.weight");
    check_linear(w, "leaf.proj", d.node, d.detection_feature);
    d.grid_channels = cols_of(w, "node.proj.weight");
    check_linear(w, "node.proj", d.node, d.grid_channels);

    switch (config.temporal_mode) {
        case TemporalMode::Attention: {
            const std::size_t model_w = w.get("tattn.Wq").dim(0);
            d.volume_channels = cols_of(w, "tattn.Wk");
            w.get("tattn.Wq", {model_w, d.node});
            w.get("tattn.bq", {model_w});
            w.get("tattn.Wk", {model_w, d.volume_channels});
            w.get("tattn.bk", {model_w});
            w.get("tattn.Wv", {model_w, d.volume_channels});
            w.get("tattn.bv", {model_w});
            w.get("tattn.Wo", {d.node, model_w});
            w.get("tattn.bo", {d.node});
            if (model_w % config.heads != 0)
                throw ConfigError("config: attention width " + std::to_string(model_w) + " not divisible by " +
                                  std::to_string(config.heads) + " heads");
            break;
        }
        case TemporalMode::Difference:
            d.volume_channels = cols_of(w, "tdiff.proj.weight");
            check_linear(w, "tdiff.proj", d.node, d.volume_channels, false);
            break;
        case TemporalMode::None:
            break;
    }

    if (d.node % config.groups != 0)
        throw ConfigError("config: node width " + std::to_string(d.node) + " not divisible by " +
                          std::to_string(config.groups) + " groups");
    const std::size_t width = d.node / config.groups;
    for (std::size_t g = 0; g < config.groups; ++g) {
        const std::string base = "prop.g" + std::to_string(g);
        check_gru(w, base + ".up", width, width);
        check_gru(w, base + ".down", width, width);
    }
    check_mlp(w, "prop.mlp", 2 * d.node, d.node);

    d.reduced = linear_out_dim(w, "vis.reduce");
    check_linear(w, "vis.reduce", d.reduced, d.grid_channels);
    check_linear(w, "vis.subj_proj", d.reduced, d.node);
    check_linear(w, "vis.obj_proj", d.reduced, d.node);
    check_mlp(w, "vis.mlp", 3 * d.grid_channels, d.relation_classes);
    check_mlp(w, "fusion.mlp", 2 * d.embedding + d.node, d.relation_classes);
    check_mlp(w, "so.subj", d.node, d.relation_classes);
    check_mlp(w, "so.obj", d.node, d.relation_classes);
    return d;
}

bool triplet_before(const TripletPrediction& a, const TripletPrediction& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    if (a.subj_idx != b.subj_idx) return a.subj_idx < b.subj_idx;
    if (a.obj_idx != b.obj_idx) return a.obj_idx < b.obj_idx;
    return a.rel_class < b.rel_class;
}

std::vector<IndexPair> enumerate_pairs(std::span<const Detection> dets, bool overlap_only) {
    std::vector<IndexPair> pairs;
    for (std::size_t i = 0; i < dets.size(); ++i)
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (i == j) continue;
            if (overlap_only && intersection_area(dets[i].box, dets[j].box) <= 0.0) continue;
            pairs.emplace_back(i, j);
        }
    return pairs;
}

NodeFeatures node_input_features(const FrameInput& frame, const HRTree& tree, std::span<const std::size_t> kept,
                                 const Model& model, const Config& config) {
    const WeightStore& w = model.weights;
    NodeFeatures feats(tree.nodes.size());
    for (std::size_t leaf = 0; leaf < kept.size(); ++leaf)
        feats[tree.leaves[leaf]] = linear(frame.detection_features.at(kept[leaf]), w, "leaf.proj");

    for (const HRTreeNode& node : tree.nodes) {
        if (node.is_leaf()) continue;
        const BoundingBox grid_box = node.box.scaled(1.0 / frame.grid.stride);
        const Vec pooled =
            spatial_mean(roi_align(frame.grid.tensor, grid_box, config.node_pool.height, config.node_pool.width));
        Vec spatial = linear(pooled, w, "node.proj");
        switch (config.temporal_mode) {
            case TemporalMode::Attention: {
                const std::vector<Vec> tube = extract_tube_features(frame.volume, node.box, config.node_pool);
                spatial = temporal_fuse_attention(spatial, tube, w, config.heads);
                break;
            }
            case TemporalMode::Difference:
                spatial = temporal_fuse_difference(frame.volume, spatial, node.box, w, config.node_pool);
                break;
            case TemporalMode::None:
                break;
        }
        feats[node.id] = std::move(spatial);
    }
    return feats;
}

FrameContext prepare_frame(const FrameInput& frame, const Model& model, const Config& config) {
    const std::size_t object_classes = model.embedding.classes();
    if (frame.detection_features.size() != frame.detections.size())
        throw PreconditionError("frame " + std::to_string(frame.frame) + ": one feature vector per detection required");
    for (const Detection& det : frame.detections)
        if (det.class_scores.size() != object_classes)
            throw IngestError("frame " + std::to_string(frame.frame) + ": detection has " +
                              std::to_string(det.class_scores.size()) + " class scores, expected " +
                              std::to_string(object_classes));

    FrameContext ctx;
    if (config.mode == EvalMode::SGDet) {
        ctx.source_indices = per_class_nms_indices(frame.detections, config.nms_iou, config.top_proposals);
    } else {
        ctx.source_indices.resize(frame.detections.size());
        std::iota(ctx.source_indices.begin(), ctx.source_indices.end(), std::size_t{0});
    }
    for (std::size_t src : ctx.source_indices) {
        const Detection& det = frame.detections[src];
        ctx.detections.push_back(det);
        if (config.mode == EvalMode::PredCls) {
            if (!frame.labels || frame.labels->size() != frame.detections.size())
                throw IngestError("frame " + std::to_string(frame.frame) + ": predcls needs a label per detection");
            const std::size_t label = (*frame.labels)[src];
            if (label >= object_classes)
                throw IngestError("frame " + std::to_string(frame.frame) + ": label out of range");
            Vec one_hot(object_classes, 0.0);
            one_hot[label] = 1.0;
            ctx.classes.push_back(label);
            ctx.class_scores.push_back(std::move(one_hot));
        } else {
            ctx.classes.push_back(det.argmax_class());
            ctx.class_scores.push_back(det.class_scores);
        }
    }
    if (ctx.detections.empty()) return ctx;

    ctx.tree = build_hrtree(ctx.detections, frame.frame_width, frame.frame_height, config.scheme);
    if (ctx.detections.size() < 2) return ctx;

    if (config.temporal_mode != TemporalMode::None && frame.volume.steps() != config.temporal_window)
        throw ConfigError("frame " + std::to_string(frame.frame) + ": volume has " +
                          std::to_string(frame.volume.steps()) + " timesteps, config T is " +
                          std::to_string(config.temporal_window));

    ctx.node_inputs = node_input_features(frame, ctx.tree, ctx.source_indices, model, config);
    PropagationOptions prop;
    prop.groups = config.groups;
    prop.top_down_input = config.top_down_input;
    ctx.contextual = spatial_propagate(ctx.tree, ctx.node_inputs, model.weights, prop);

    if (config.mode != EvalMode::SGDet && frame.pairs) {
        for (const auto& [i, j] : *frame.pairs) {
            if (i >= ctx.detections.size() || j >= ctx.detections.size() || i == j)
                throw IngestError("frame " + std::to_string(frame.frame) + ": invalid ground-truth pair");
            ctx.pairs.emplace_back(i, j);
        }
    } else {
        ctx.pairs = enumerate_pairs(ctx.detections, config.overlap_only);
    }
    return ctx;
}

std::vector<BranchLogits> pair_branches(const FrameContext& ctx, const FrameInput& frame, const Model& model,
                                        const Config& config, std::size_t i, std::size_t j) {
    const WeightStore& w = model.weights;
    const NodeId leaf_i = ctx.tree.leaves[i];
    const NodeId leaf_j = ctx.tree.leaves[j];
    const Vec& subj_ctx = ctx.contextual[leaf_i];
    const Vec& obj_ctx = ctx.contextual[leaf_j];

    const BoundingBox pair_box = union_box(ctx.detections[i].box, ctx.detections[j].box);
    const Tensor rel_map = roi_align(frame.grid.tensor, pair_box.scaled(1.0 / frame.grid.stride),
                                     config.relation_pool.height, config.relation_pool.width);

    std::vector<BranchLogits> out;
    out.push_back(visual_branch(rel_map, linear(subj_ctx, w, "vis.subj_proj"), linear(obj_ctx, w, "vis.obj_proj"), w)
                      .logits);
    out.push_back(fusion_branch(ctx.class_scores[i], ctx.class_scores[j], model.embedding,
                                ctx.contextual[lca(ctx.tree, leaf_i, leaf_j)], w));
    out.push_back(subject_object_branch(subj_ctx, obj_ctx, w));
    out.push_back(prior_branch(ctx.classes[i], ctx.classes[j], model.frequency, config.prior_alpha));
    return out;
}

SceneGraph generate_frame_graph(const FrameInput& frame, const Model& model, const Config& config) {
    const FrameContext ctx = prepare_frame(frame, model, config);
    SceneGraph graph;
    graph.video = frame.video;
    graph.frame = frame.frame;
    graph.detections = ctx.detections;
    graph.source_indices = ctx.source_indices;
    graph.classes = ctx.classes;

    for (const auto& [i, j] : ctx.pairs) {
        const std::vector<BranchLogits> branches = pair_branches(ctx, frame, model, config, i, j);
        const Vec scores = fuse_scores(branches);
        std::vector<std::size_t> rels(scores.size());
        std::iota(rels.begin(), rels.end(), std::size_t{0});
        std::stable_sort(rels.begin(), rels.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        const std::size_t keep = std::min(config.k_per_pair, rels.size());
        for (std::size_t k = 0; k < keep; ++k)
            graph.triplets.push_back({i, j, ctx.classes[i], ctx.classes[j], rels[k], scores[rels[k]]});
    }
    std::sort(graph.triplets.begin(), graph.triplets.end(), triplet_before);
    return graph;
}

}  // namespace trace
