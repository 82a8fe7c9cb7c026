#include "trace/hrtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include "trace/errors.hpp"
#include "trace/simd.hpp"

namespace trace {

CenterScheme parse_center_scheme(int value) {
    if (value == 1) return CenterScheme::Alternating;
    if (value == 2) return CenterScheme::TopBottom;
    throw ConfigError("hrtree: scheme must be 1 or 2, got " + std::to_string(value));
}

NodeCoord node_coord(const BoundingBox& box, double frame_w, double frame_h) noexcept {
    return {box.center_x() / frame_w, box.center_y() / frame_h, box.width() / frame_w, box.height() / frame_h};
}

std::vector<double> proximity_scores(std::span<const NodeCoord> coords) {
    std::vector<double> scores(coords.size(), 0.0);
    for (std::size_t k = 0; k < coords.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < coords.size(); ++i) acc += std::exp(-simd::squared_distance(coords[k], coords[i]));
        scores[k] = acc;
    }
    return scores;
}

std::vector<std::size_t> select_centers(std::span<const ScoredNode> nodes, CenterScheme scheme) {
    const std::size_t n = nodes.size();
    if (n < 2) throw PreconditionError("select_centers: need at least 2 nodes");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (nodes[a].score != nodes[b].score) return nodes[a].score > nodes[b].score;
        return nodes[a].key < nodes[b].key;
    });

    std::vector<std::size_t> centers;
    if (scheme == CenterScheme::Alternating) {
        for (std::size_t r = 0; r < n; r += 2) centers.push_back(order[r]);
    } else {
        const std::size_t target = (n + 1) / 2;  // round(n/2), halves up
        const std::size_t from_top = (target + 1) / 2;
        const std::size_t from_bottom = target / 2;
        for (std::size_t r = 0; r < from_top; ++r) centers.push_back(order[r]);
        for (std::size_t r = n - from_bottom; r < n; ++r) centers.push_back(order[r]);
    }
    return centers;
}

HRTree build_hrtree(std::span<const Detection> detections, double frame_w, double frame_h, CenterScheme scheme) {
    if (!(frame_w > 0.0 && frame_h > 0.0)) throw PreconditionError("build_hrtree: frame size must be positive");
    HRTree tree;
    const std::size_t n = detections.size();
    if (n == 0) return tree;

    std::vector<std::size_t> canonical(n);
    std::iota(canonical.begin(), canonical.end(), std::size_t{0});
    std::sort(canonical.begin(), canonical.end(), [&](std::size_t a, std::size_t b) {
        const auto& da = detections[a];
        const auto& db = detections[b];
        return std::make_tuple(da.box.x1, da.box.y1, da.box.x2, da.box.y2, da.argmax_class(), a) <
               std::make_tuple(db.box.x1, db.box.y1, db.box.x2, db.box.y2, db.argmax_class(), b);
    });

    tree.nodes.resize(n);
    for (std::size_t rank = 0; rank < n; ++rank) tree.nodes[canonical[rank]].order_key = rank;
    for (std::size_t i = 0; i < n; ++i) {
        HRTreeNode& leaf = tree.nodes[i];
        leaf.id = i;
        leaf.box = detections[i].box;
        leaf.coord = node_coord(leaf.box, frame_w, frame_h);
        tree.leaves.push_back(i);
    }

    auto by_key = [&](NodeId a, NodeId b) { return tree.nodes[a].order_key < tree.nodes[b].order_key; };
    std::vector<NodeId> layer(tree.leaves);
    std::sort(layer.begin(), layer.end(), by_key);

    while (layer.size() > 1) {
        std::vector<NodeCoord> coords;
        coords.reserve(layer.size());
        for (NodeId id : layer) coords.push_back(tree.nodes[id].coord);
        const std::vector<double> scores = proximity_scores(coords);

        std::vector<ScoredNode> scored;
        for (std::size_t i = 0; i < layer.size(); ++i) {
            tree.nodes[layer[i]].score = scores[i];
            scored.push_back({tree.nodes[layer[i]].order_key, scores[i]});
        }
        std::vector<std::size_t> center_pos = select_centers(scored, scheme);
        std::sort(center_pos.begin(), center_pos.end());  // layer is key-sorted, so this is key order

        std::vector<bool> is_center(layer.size(), false);
        for (std::size_t c : center_pos) is_center[c] = true;
        std::vector<std::vector<std::size_t>> assigned(layer.size());
        for (std::size_t i = 0; i < layer.size(); ++i) {
            if (is_center[i]) continue;
            std::size_t best = center_pos.front();
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c : center_pos) {
                const double d = simd::squared_distance(coords[i], coords[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assigned[best].push_back(i);
        }

        std::vector<NodeId> next;
        for (std::size_t c : center_pos) {
            if (assigned[c].empty()) {
                next.push_back(layer[c]);
                continue;
            }
            HRTreeNode parent;
            parent.id = tree.nodes.size();
            parent.order_key = tree.nodes[layer[c]].order_key;
            parent.children.push_back(layer[c]);
            parent.box = tree.nodes[layer[c]].box;
            for (std::size_t m : assigned[c]) {
                parent.children.push_back(layer[m]);
                parent.box = union_box(parent.box, tree.nodes[layer[m]].box);
            }
            parent.coord = node_coord(parent.box, frame_w, frame_h);
            for (NodeId child : parent.children) tree.nodes[child].parent = parent.id;
            next.push_back(parent.id);
            tree.nodes.push_back(std::move(parent));
        }
        std::sort(next.begin(), next.end(), by_key);
        layer = std::move(next);
    }
    tree.root = layer.front();
    tree.nodes[*tree.root].score = 1.0;  // a lone node scores only itself
    return tree;
}

std::size_t HRTree::depth() const {
    if (!root) return 0;
    std::vector<std::size_t> level(nodes.size(), 0);
    std::size_t deepest = 0;
    std::vector<NodeId> stack{*root};
    level[*root] = 1;
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, level[id]);
        for (NodeId c : nodes[id].children) {
            level[c] = level[id] + 1;
            stack.push_back(c);
        }
    }
    return deepest;
}

std::vector<NodeId> HRTree::post_order() const {
    std::vector<NodeId> out;
    if (!root) return out;
    std::vector<std::pair<NodeId, bool>> stack{{*root, false}};
    while (!stack.empty()) {
        auto [id, expanded] = stack.back();
        stack.pop_back();
        if (expanded) {
            out.push_back(id);
            continue;
        }
        stack.push_back({id, true});
        const auto& ch = nodes[id].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, false});
    }
    return out;
}

std::vector<NodeId> HRTree::leaf_descendants(NodeId id) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
        const NodeId cur = stack.back();
        stack.pop_back();
        if (nodes.at(cur).is_leaf()) out.push_back(cur);
        for (NodeId c : nodes[cur].children) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

NodeId lca(const HRTree& tree, NodeId leaf_a, NodeId leaf_b) {
    if (leaf_a == leaf_b) throw PreconditionError("lca: leaves must be distinct");
    if (leaf_a >= tree.nodes.size() || leaf_b >= tree.nodes.size() || !tree.nodes[leaf_a].is_leaf() ||
        !tree.nodes[leaf_b].is_leaf())
        throw PreconditionError("lca: unknown leaf id");

    auto depth_of = [&](NodeId id) {
        std::size_t d = 0;
        while (tree.nodes[id].parent) {
            id = *tree.nodes[id].parent;
            ++d;
        }
        return d;
    };
    NodeId a = leaf_a;
    NodeId b = leaf_b;
    std::size_t da = depth_of(a);
    std::size_t db = depth_of(b);
    while (da > db) {
        a = *tree.nodes[a].parent;
        --da;
    }
    while (db > da) {
        b = *tree.nodes[b].parent;
        --db;
    }
    while (a != b) {
        a = *tree.nodes[a].parent;
        b = *tree.nodes[b].parent;
    }
    return a;
}

std::string format_outline(const HRTree& tree) {
    std::ostringstream os;
    if (!tree.root) {
        os << "(empty)\n";
        return os.str();
    }
    std::vector<std::pair<NodeId, std::size_t>> stack{{*tree.root, 0}};
    while (!stack.empty()) {
        auto [id, indent] = stack.back();
        stack.pop_back();
        const HRTreeNode& n = tree.nodes[id];
        os << std::string(indent * 2, ' ') << (n.is_leaf() ? "leaf " : "node ") << id << " [" << n.box.x1 << ","
           << n.box.y1 << "," << n.box.x2 << "," << n.box.y2 << "] score=" << n.score << "\n";
        for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back({*it, indent + 1});
    }
    return os.str();
}

}  // namespace trace
