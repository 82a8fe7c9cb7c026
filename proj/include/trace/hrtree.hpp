#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trace/geometry.hpp"

namespace trace {

using NodeId = std::size_t;

enum class CenterScheme { Alternating = 1, TopBottom = 2 };

CenterScheme parse_center_scheme(int value);

// Normalized (cx/W, cy/H, w/W, h/H).
using NodeCoord = std::array<double, 4>;

NodeCoord node_coord(const BoundingBox& box, double frame_w, double frame_h) noexcept;

struct HRTreeNode {
    NodeId id = 0;
    BoundingBox box;
    NodeCoord coord{};
    // Proximity score from the layer in which this node was last scored.
    double score = 0.0;
    std::vector<NodeId> children;
    std::optional<NodeId> parent;
    // Canonical tie-break key: leaves rank by (x1, y1, x2, y2, class, index);
    // a parent inherits the key of its center.
    std::size_t order_key = 0;

    bool is_leaf() const noexcept { return children.empty(); }
};

struct HRTree {
    std::vector<HRTreeNode> nodes;
    std::optional<NodeId> root;
    std::vector<NodeId> leaves;  // leaves[i] is the node of detection i

    bool empty() const noexcept { return nodes.empty(); }
    std::size_t leaf_count() const noexcept { return leaves.size(); }
    std::size_t internal_count() const noexcept { return nodes.size() - leaves.size(); }
    const HRTreeNode& node(NodeId id) const { return nodes.at(id); }
    // Node levels on the longest root-to-leaf path (a lone leaf has depth 1).
    std::size_t depth() const;
    // Node ids with children listed before parents.
    std::vector<NodeId> post_order() const;
    std::vector<NodeId> leaf_descendants(NodeId id) const;
};

// score_k = sum_i exp(-||f_k - f_i||^2), including i = k.
std::vector<double> proximity_scores(std::span<const NodeCoord> coords);

struct ScoredNode {
    std::size_t key;  // tie-break key, ascending wins
    double score;
};

// Positions (into `nodes`) of the chosen centers, in descending score order.
std::vector<std::size_t> select_centers(std::span<const ScoredNode> nodes, CenterScheme scheme);

HRTree build_hrtree(std::span<const Detection> detections, double frame_w, double frame_h, CenterScheme scheme);

// Deepest common ancestor of two distinct leaves.
NodeId lca(const HRTree& tree, NodeId leaf_a, NodeId leaf_b);

// Indented outline, one node per line.
std::string format_outline(const HRTree& tree);

}  // namespace trace
