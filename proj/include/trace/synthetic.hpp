#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trace/io.hpp"

namespace trace::synth {

// Relations planted on an ordered object-class pair.
class RelationRules {
public:
    RelationRules(std::size_t object_classes, std::size_t relation_classes);

    std::size_t object_classes() const noexcept { return objects_; }
    std::size_t relation_classes() const noexcept { return relations_; }
    // Ascending, one or two relation ids.
    std::vector<std::size_t> relations(std::size_t subj_class, std::size_t obj_class) const;

private:
    std::size_t objects_;
    std::size_t relations_;
};

struct SceneSpec {
    std::size_t objects = 5;
    long frames = 60;
    std::size_t videos = 1;
    std::uint64_t seed = 0;
    std::size_t object_classes = 6;
    std::size_t relation_classes = 5;
    std::size_t groups;
    std::size_t segment_length;
    std::size_t segment_interval;
    // Model widths.
    std::size_t feature_width = 16;  // Fd
    std::size_t node_width = 32;     // d
    std::size_t grid_channels = 8;   // C of the 2-D map
    std::size_t clip_channels = 8;   // C of the 3-D map
    std::size_t reduced_width = 8;   // d'
    std::size_t hidden_width = 16;   // hidden layer of the visual MLP
    double grid_stride = 16.0;

    SceneSpec();
};

// Objects are split into clusters of 2 and 3 (a lone remainder joins the last
// cluster); each cluster drifts inside its own cell of the frame, so boxes
// overlap only within a cluster. Ground truth relates every ordered pair in a
// cluster by the rules on its classes, on every frame.
io::DatasetBundle generate_scene(const SceneSpec& spec);

// Weights under which the fusion branch alone recovers the planted rules from
// the detection class scores; every other parameter is zero.
WeightStore oracle_weights(const SceneSpec& spec, const RelationRules& rules);

// Uniform(-1/sqrt(in), 1/sqrt(in)) weights of the same shapes.
WeightStore random_weights(const SceneSpec& spec, std::uint64_t seed);

}  // namespace trace::synth
