#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trace/geometry.hpp"
#include "trace/hrtree.hpp"
#include "trace/kernels.hpp"
#include "trace/tensor.hpp"

namespace trace {

// Ingested spatio-temporal features [T x C x H x W]; boxes in pixels map to
// grid cells by dividing by `stride`.
struct FeatureVolume {
    Tensor tensor;
    double stride = 1.0;

    std::size_t steps() const { return tensor.dim(0); }
    std::size_t channels() const { return tensor.dim(1); }
};

// Ingested 2D feature map [C x H x W] of the center frame.
struct FeatureGrid {
    Tensor tensor;
    double stride = 1.0;

    std::size_t channels() const { return tensor.dim(0); }
};

struct PoolSize {
    std::size_t height = 1;
    std::size_t width = 1;
};

// One entry per tree node, indexed by NodeId.
using NodeFeatures = std::vector<Vec>;

// roi_align + spatial mean of the same box on every timestep.
std::vector<Vec> extract_tube_features(const FeatureVolume& volume, const BoundingBox& box, PoolSize pool);

// spatial + attention(query = spatial, keys = values = tube). Parameters under
// `<prefix>` as in multi_head_attention.
Vec temporal_fuse_attention(std::span<const double> spatial, std::span<const Vec> tube, const WeightStore& w,
                            std::size_t heads, const std::string& prefix = "tattn");

// Mean of consecutive slice differences, pooled over `box`, projected by
// `<prefix>.weight` [d x C] (no bias) and added to `spatial`.
Vec temporal_fuse_difference(const FeatureVolume& volume, std::span<const double> spatial, const BoundingBox& box,
                             const WeightStore& w, PoolSize pool, const std::string& prefix = "tdiff.proj");

// Input of the top-down GRU pass.
enum class TopDownInput { NodeFeature, BottomUpState };

struct PropagationOptions {
    std::size_t groups = 1;
    TopDownInput top_down_input = TopDownInput::NodeFeature;
    std::string prefix = "prop";
};

// Hidden states of every node, per group, before the output MLP.
struct PropagationStates {
    std::vector<std::vector<Vec>> bottom_up;  // [group][node]
    std::vector<std::vector<Vec>> top_down;   // [group][node]
};

PropagationStates propagate_states(const HRTree& tree, const NodeFeatures& feats, const WeightStore& w,
                                   const PropagationOptions& options);

// [h_0 ; h'_0 ; h_1 ; h'_1 ; ...] for one node.
Vec concat_states(const PropagationStates& states, NodeId node);

// Group tree-GRU: per group a child-sum bottom-up pass (<prefix>.g<k>.up) then
// a top-down pass (<prefix>.g<k>.down); per node the concatenated states go
// through <prefix>.mlp.
NodeFeatures spatial_propagate(const HRTree& tree, const NodeFeatures& feats, const WeightStore& w,
                               const PropagationOptions& options);

}  // namespace trace
