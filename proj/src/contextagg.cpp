#include "trace/contextagg.hpp"

#include "trace/errors.hpp"
#include "trace/simd.hpp"

namespace trace {

std::vector<Vec> extract_tube_features(const FeatureVolume& volume, const BoundingBox& box, PoolSize pool) {
    if (volume.tensor.rank() != 4 || volume.steps() == 0)
        throw PreconditionError("extract_tube_features: volume must be [T x C x H x W] with T >= 1");
    if (!(volume.stride > 0.0)) throw PreconditionError("extract_tube_features: stride must be positive");
    const BoundingBox cell_box = box.scaled(1.0 / volume.stride);
    std::vector<Vec> tube;
    tube.reserve(volume.steps());
    for (std::size_t t = 0; t < volume.steps(); ++t)
        tube.push_back(spatial_mean(roi_align(volume.tensor.slice(t), cell_box, pool.height, pool.width)));
    return tube;
}

Vec temporal_fuse_attention(std::span<const double> spatial, std::span<const Vec> tube, const WeightStore& w,
                            std::size_t heads, const std::string& prefix) {
    if (tube.empty()) throw PreconditionError("temporal_fuse_attention: empty tube");
    const Vec attended = multi_head_attention(spatial, tube, tube, w, prefix, heads);
    if (attended.size() != spatial.size())
        throw ConfigError("weights: '" + prefix + ".Wo' must project back to width " + std::to_string(spatial.size()));
    Vec out(spatial.begin(), spatial.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += attended[i];
    return out;
}

Vec temporal_fuse_difference(const FeatureVolume& volume, std::span<const double> spatial, const BoundingBox& box,
                             const WeightStore& w, PoolSize pool, const std::string& prefix) {
    if (volume.tensor.rank() != 4) throw PreconditionError("temporal_fuse_difference: volume must be rank 4");
    const std::size_t steps = volume.steps();
    if (steps < 2) throw PreconditionError("temporal_fuse_difference: need at least 2 timesteps");

    Shape slice_shape(volume.tensor.shape().begin() + 1, volume.tensor.shape().end());
    Tensor mean_diff(slice_shape, 0.0);
    const std::size_t stride = mean_diff.size();
    const auto data = volume.tensor.data();
    const double inv = 1.0 / static_cast<double>(steps - 1);
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        for (std::size_t i = 0; i < stride; ++i)
            mean_diff[i] += (data[(t + 1) * stride + i] - data[t * stride + i]) * inv;
    }
    const Vec motion =
        spatial_mean(roi_align(mean_diff, box.scaled(1.0 / volume.stride), pool.height, pool.width));
    const Vec projected = linear(motion, w, prefix, false);
    if (projected.size() != spatial.size())
        throw ConfigError("weights: '" + prefix + ".weight' must project to width " + std::to_string(spatial.size()));
    Vec out(spatial.begin(), spatial.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += projected[i];
    return out;
}

PropagationStates propagate_states(const HRTree& tree, const NodeFeatures& feats, const WeightStore& w,
                                   const PropagationOptions& options) {
    if (tree.empty()) throw PreconditionError("spatial_propagate: empty tree");
    if (feats.size() != tree.nodes.size())
        throw PreconditionError("spatial_propagate: need exactly one feature per tree node");
    const std::size_t dim = feats.front().size();
    for (const Vec& f : feats)
        if (f.size() != dim) throw PreconditionError("spatial_propagate: node features must share one width");
    if (options.groups == 0 || dim % options.groups != 0)
        throw ConfigError("spatial_propagate: feature width " + std::to_string(dim) + " not divisible by " +
                          std::to_string(options.groups) + " groups");

    const std::size_t width = dim / options.groups;
    const std::size_t count = tree.nodes.size();
    const std::vector<NodeId> order = tree.post_order();

    PropagationStates st;
    st.bottom_up.assign(options.groups, std::vector<Vec>(count));
    st.top_down.assign(options.groups, std::vector<Vec>(count));
    for (std::size_t g = 0; g < options.groups; ++g) {
        const std::string base = options.prefix + ".g" + std::to_string(g);
        auto slice = [&](NodeId id) {
            return std::span<const double>(feats[id].data() + g * width, width);
        };
        for (NodeId id : order) {
            Vec child_sum(width, 0.0);
            for (NodeId c : tree.nodes[id].children) simd::axpy(1.0, st.bottom_up[g][c], child_sum);
            st.bottom_up[g][id] = gru_cell(slice(id), child_sum, w, base + ".up");
        }
        const Vec zero(width, 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const NodeId id = *it;
            const auto& parent = tree.nodes[id].parent;
            const Vec& prev = parent ? st.top_down[g][*parent] : zero;
            const std::span<const double> input = options.top_down_input == TopDownInput::NodeFeature
                                                      ? slice(id)
                                                      : std::span<const double>(st.bottom_up[g][id]);
            st.top_down[g][id] = gru_cell(input, prev, w, base + ".down");
        }
    }
    return st;
}

Vec concat_states(const PropagationStates& states, NodeId node) {
    Vec out;
    for (std::size_t g = 0; g < states.bottom_up.size(); ++g) {
        const Vec& up = states.bottom_up[g][node];
        const Vec& down = states.top_down[g][node];
        out.insert(out.end(), up.begin(), up.end());
        out.insert(out.end(), down.begin(), down.end());
    }
    return out;
}

NodeFeatures spatial_propagate(const HRTree& tree, const NodeFeatures& feats, const WeightStore& w,
                               const PropagationOptions& options) {
    const PropagationStates st = propagate_states(tree, feats, w, options);
    NodeFeatures out(tree.nodes.size());
    for (NodeId id = 0; id < tree.nodes.size(); ++id) out[id] = mlp_forward(concat_states(st, id), w, options.prefix + ".mlp");
    return out;
}

}  // namespace trace
