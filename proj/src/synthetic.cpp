#include "trace/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "trace/constants.hpp"
#include "trace/errors.hpp"
#include "trace/linking.hpp"

namespace trace::synth {
namespace {

constexpr double kCellWidth = 80.0;
constexpr double kCellHeight = 60.0;
constexpr double kBoxWidth = 24.0;
constexpr double kBoxHeight = 18.0;
constexpr std::size_t kMinCells = 4;
// Member offsets inside a cluster: every pair overlaps, no pair reaches IoU 1/2.
constexpr double kOffsets[][2] = {{0.0, 0.0}, {12.0, 4.0}, {6.0, 10.0}, {16.0, 12.0}};
constexpr std::size_t kMaxClusterSize = std::size(kOffsets);
// Oracle fusion unit (a, b) fires only when both class scores are confident:
// true-class scores lie in [0.8, 0.9] and every other score is at most 0.2.
constexpr double kTrueScoreLow = 0.8;
constexpr double kTrueScoreHigh = 0.9;
constexpr double kOracleThreshold = 1.1;
constexpr double kOracleGain = 4.0;

class Rng {
public:
    explicit Rng(std::seed_seq& seq) : engine_(seq) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
};

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }
double round_to(double v, double step) { return std::round(v / step) * step; }

std::vector<std::size_t> cluster_sizes(std::size_t objects) {
    std::vector<std::size_t> sizes;
    std::size_t left = objects;
    for (std::size_t k = 0; left > 0; ++k) {
        const std::size_t want = k % 2 == 0 ? 2 : 3;
        std::size_t take = std::min(want, left);
        if (left - take == 1) ++take;
        sizes.push_back(take);
        left -= take;
    }
    return sizes;
}

struct ObjectPlan {
    std::size_t cluster = 0;
    std::size_t cls = 0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    std::vector<double> scores;
};

struct ClusterMotion {
    double cx = 0.0, cy = 0.0;
    double ax = 0.0, ay = 0.0;
    double wx = 0.0, wy = 0.0;
    double px = 0.0, py = 0.0;

    std::pair<double, double> at(long t) const {
        const double tt = static_cast<double>(t);
        return {cx + ax * std::sin(wx * tt + px), cy + ay * std::sin(wy * tt + py)};
    }
};

std::string frame_tag(const std::string& video, long frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05ld", frame);
    return video + "/" + buf;
}

using ShapeList = std::vector<std::pair<std::string, Shape>>;

void add_linear(ShapeList& out, const std::string& prefix, std::size_t o, std::size_t i, bool bias = true) {
    out.emplace_back(prefix + ".weight", Shape{o, i});
    if (bias) out.emplace_back(prefix + ".bias", Shape{o});
}

void add_gru(ShapeList& out, const std::string& prefix, std::size_t width) {
    for (const char* gate : {"z", "r", "h"}) {
        const std::string g(gate);
        out.emplace_back(prefix + ".W" + g, Shape{width, width});
        out.emplace_back(prefix + ".U" + g, Shape{width, width});
        out.emplace_back(prefix + ".b" + g, Shape{width});
    }
}

ShapeList parameter_shapes(const SceneSpec& s) {
    if (s.groups == 0 || s.node_width % s.groups != 0)
        throw ConfigError("synth: node width " + std::to_string(s.node_width) + " not divisible by " +
                          std::to_string(s.groups) + " groups");
    const std::size_t d = s.node_width;
    const std::size_t O = s.object_classes;
    const std::size_t R = s.relation_classes;
    ShapeList out;
    add_linear(out, "leaf.proj", d, s.feature_width);
    add_linear(out, "node.proj", d, s.grid_channels);
    out.emplace_back("tattn.Wq", Shape{d, d});
    out.emplace_back("tattn.bq", Shape{d});
    out.emplace_back("tattn.Wk", Shape{d, s.clip_channels});
    out.emplace_back("tattn.bk", Shape{d});
    out.emplace_back("tattn.Wv", Shape{d, s.clip_channels});
    out.emplace_back("tattn.bv", Shape{d});
    out.emplace_back("tattn.Wo", Shape{d, d});
    out.emplace_back("tattn.bo", Shape{d});
    add_linear(out, "tdiff.proj", d, s.clip_channels, false);
    for (std::size_t g = 0; g < s.groups; ++g) {
        const std::string base = "prop.g" + std::to_string(g);
        add_gru(out, base + ".up", d / s.groups);
        add_gru(out, base + ".down", d / s.groups);
    }
    add_linear(out, "prop.mlp.0", d, 2 * d);
    add_linear(out, "vis.reduce", s.reduced_width, s.grid_channels);
    add_linear(out, "vis.subj_proj", s.reduced_width, d);
    add_linear(out, "vis.obj_proj", s.reduced_width, d);
    add_linear(out, "vis.mlp.0", s.hidden_width, 3 * s.grid_channels);
    add_linear(out, "vis.mlp.1", R, s.hidden_width);
    add_linear(out, "fusion.mlp.0", O * O, 2 * O + d);
    add_linear(out, "fusion.mlp.1", R, O * O);
    add_linear(out, "so.subj.0", R, d);
    add_linear(out, "so.obj.0", R, d);
    return out;
}

}  // namespace

RelationRules::RelationRules(std::size_t object_classes, std::size_t relation_classes)
    : objects_(object_classes), relations_(relation_classes) {
    if (relations_ == 0) throw PreconditionError("RelationRules: need at least one relation class");
}

std::vector<std::size_t> RelationRules::relations(std::size_t a, std::size_t b) const {
    std::vector<std::size_t> out{(3 * a + b) % relations_};
    if ((a + b) % 2 == 0) {
        const std::size_t second = (a + 2 * b + 1) % relations_;
        if (second != out.front()) out.push_back(second);
    }
    std::sort(out.begin(), out.end());
    return out;
}

SceneSpec::SceneSpec()
    : groups(constants().default_groups.value),
      segment_length(constants().segment_length.value),
      segment_interval(constants().segment_interval.value) {}

WeightStore random_weights(const SceneSpec& spec, std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xA5A5u};
    Rng rng(seq);
    WeightStore w;
    std::size_t fan_in = 1;
    for (const auto& [name, shape] : parameter_shapes(spec)) {
        if (shape.size() == 2) fan_in = shape[1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> data(shape_size(shape));
        for (double& v : data) v = to_float(rng.uniform(-bound, bound));
        w.insert(name, Tensor(shape, std::move(data)));
    }
    return w;
}

WeightStore oracle_weights(const SceneSpec& spec, const RelationRules& rules) {
    WeightStore w;
    for (const auto& [name, shape] : parameter_shapes(spec)) w.insert(name, Tensor(shape));
    const std::size_t O = spec.object_classes;
    const std::size_t R = spec.relation_classes;
    const std::size_t in = 2 * O + spec.node_width;
    Tensor hidden({O * O, in});
    Tensor hidden_bias({O * O}, to_float(-kOracleThreshold));
    Tensor out({R, O * O});
    for (std::size_t a = 0; a < O; ++a)
        for (std::size_t b = 0; b < O; ++b) {
            const std::size_t unit = a * O + b;
            hidden[unit * in + a] = 1.0;
            hidden[unit * in + O + b] = 1.0;
            for (std::size_t r : rules.relations(a, b)) out[r * O * O + unit] = kOracleGain;
        }
    w.insert("fusion.mlp.0.weight", std::move(hidden));
    w.insert("fusion.mlp.0.bias", std::move(hidden_bias));
    w.insert("fusion.mlp.1.weight", std::move(out));
    return w;
}

io::DatasetBundle generate_scene(const SceneSpec& spec) {
    const std::size_t O = spec.object_classes;
    const std::size_t R = spec.relation_classes;
    const RelationRules rules(O, R);
    const std::vector<std::size_t> sizes = cluster_sizes(spec.objects);
    if (!sizes.empty() && *std::max_element(sizes.begin(), sizes.end()) > std::min(O, kMaxClusterSize))
        throw PreconditionError("synth: too few object classes for distinct classes within a cluster");

    const std::size_t cols = std::max(kMinCells, static_cast<std::size_t>(std::ceil(std::sqrt(sizes.size()))));
    const std::size_t rows = std::max(kMinCells, (sizes.size() + cols - 1) / cols);

    io::DatasetBundle b;
    io::BundleHeader& h = b.header;
    for (std::size_t k = 0; k < O; ++k) h.object_classes.push_back("object" + std::to_string(k));
    for (std::size_t k = 0; k < R; ++k) h.relation_classes.push_back("relation" + std::to_string(k));
    h.frame_width = static_cast<double>(cols) * kCellWidth;
    h.frame_height = static_cast<double>(rows) * kCellHeight;
    h.grid_stride = spec.grid_stride;
    const auto grid_w = static_cast<std::size_t>(std::ceil(h.frame_width / spec.grid_stride));
    const auto grid_h = static_cast<std::size_t>(std::ceil(h.frame_height / spec.grid_stride));

    std::vector<AnnotatedTriplet> annotations;
    for (std::size_t v = 0; v < spec.videos; ++v) {
        const std::string video = "video" + std::to_string(v);
        h.videos.push_back({video, spec.frames});
        std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                          static_cast<std::uint32_t>(v)};
        Rng rng(seq);

        std::vector<ClusterMotion> motion(sizes.size());
        std::vector<ObjectPlan> objects;
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            ClusterMotion& m = motion[c];
            m.cx = (static_cast<double>(c % cols) + 1.0 / 2.0) * kCellWidth;
            m.cy = (static_cast<double>(c / cols) + 1.0 / 2.0) * kCellHeight;
            m.ax = rng.uniform(2.0, 6.0);
            m.ay = rng.uniform(2.0, 6.0);
            m.wx = rng.uniform(0.05, 0.2);
            m.wy = rng.uniform(0.05, 0.2);
            m.px = rng.uniform(0.0, 2.0 * std::numbers::pi);
            m.py = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const std::size_t base = rng.below(O);
            for (std::size_t k = 0; k < sizes[c]; ++k) {
                ObjectPlan obj;
                obj.cluster = c;
                obj.cls = (base + k) % O;
                obj.offset_x = kOffsets[k][0];
                obj.offset_y = kOffsets[k][1];
                const double p = round_to(rng.uniform(kTrueScoreLow, kTrueScoreHigh), 1e-3);
                std::vector<double> raw(O);
                double total = 0.0;
                for (std::size_t j = 0; j < O; ++j)
                    if (j != obj.cls) total += raw[j] = rng.uniform(0.1, 1.0);
                obj.scores.assign(O, 0.0);
                for (std::size_t j = 0; j < O; ++j)
                    obj.scores[j] = j == obj.cls ? p : std::floor((1.0 - p) * raw[j] / total * 1e3) / 1e3;
                objects.push_back(std::move(obj));
            }
        }

        // Cluster extent is centred on the cluster's drifting centre.
        const double span_x = kOffsets[3][0] + kBoxWidth;
        const double span_y = kOffsets[3][1] + kBoxHeight;
        std::vector<Trajectory> trajs(objects.size());
        for (std::size_t i = 0; i < objects.size(); ++i) {
            trajs[i].start_frame = 0;
            for (long t = 0; t < spec.frames; ++t) {
                const auto [cx, cy] = motion[objects[i].cluster].at(t);
                const double x1 = round_to(cx - span_x / 2.0 + objects[i].offset_x, 1e-2);
                const double y1 = round_to(cy - span_y / 2.0 + objects[i].offset_y, 1e-2);
                trajs[i].boxes.push_back({x1, y1, x1 + kBoxWidth, y1 + kBoxHeight});
            }
        }

        std::vector<IndexPair> pairs;
        for (std::size_t i = 0; i < objects.size(); ++i)
            for (std::size_t j = 0; j < objects.size(); ++j)
                if (i != j && objects[i].cluster == objects[j].cluster) pairs.emplace_back(i, j);

        for (long t = 0; t < spec.frames; ++t) {
            const std::string tag = frame_tag(video, t);
            io::FrameRecord rec;
            rec.video = video;
            rec.frame = t;
            rec.grid = "grid/" + tag;
            rec.clip = "clip/" + tag;
            std::vector<std::size_t> labels;
            for (std::size_t i = 0; i < objects.size(); ++i) {
                const std::string fid = "det/" + tag + "/" + std::to_string(i);
                std::vector<double> feat(spec.feature_width);
                for (std::size_t k = 0; k < feat.size(); ++k)
                    feat[k] = k < O ? (k == objects[i].cls ? 1.0 : 0.0) : to_float(rng.uniform());
                b.features.emplace(fid, Tensor::vector(std::move(feat)));
                rec.detections.push_back({trajs[i].boxes[static_cast<std::size_t>(t)], objects[i].scores, fid});
                labels.push_back(objects[i].cls);
            }
            rec.labels = std::move(labels);
            for (const auto& [name, channels] : {std::pair{rec.grid, spec.grid_channels},
                                                 std::pair{rec.clip, spec.clip_channels}}) {
                std::vector<double> data(channels * grid_h * grid_w);
                for (double& x : data) x = to_float(rng.uniform());
                b.features.emplace(name, Tensor({channels, grid_h, grid_w}, std::move(data)));
            }
            b.frames.push_back(std::move(rec));
            if (!pairs.empty()) b.pairs[{video, t}] = pairs;

            for (const auto& [i, j] : pairs)
                for (std::size_t r : rules.relations(objects[i].cls, objects[j].cls)) {
                    b.frame_gt.push_back({video, t, objects[i].cls, objects[j].cls, r,
                                          trajs[i].boxes[static_cast<std::size_t>(t)],
                                          trajs[j].boxes[static_cast<std::size_t>(t)]});
                    annotations.push_back({objects[i].cls, objects[j].cls, r,
                                           "gt_frames.jsonl:" + std::to_string(b.frame_gt.size())});
                }
        }

        for (const auto& [i, j] : pairs)
            for (std::size_t r : rules.relations(objects[i].cls, objects[j].cls))
                b.video_gt.push_back({video, objects[i].cls, objects[j].cls, r, trajs[i], trajs[j]});

        for (const Segment& seg : plan_segments(spec.frames, spec.segment_length, spec.segment_interval)) {
            for (std::size_t i = 0; i < objects.size(); ++i) {
                b.tracks.push_back({video, seg, i, trajs[i].clipped(seg.begin, seg.end)});
                for (long t = seg.begin; t < seg.end; ++t) b.track_map.push_back({video, seg.id, t, i, i});
            }
        }
    }

    Tensor identity({O, O});
    for (std::size_t k = 0; k < O; ++k) identity[k * O + k] = 1.0;
    b.embedding.matrix = std::move(identity);
    b.frequency = build_frequency_table(annotations, O, R);
    b.weights = random_weights(spec, spec.seed);
    b.oracle_weights = oracle_weights(spec, rules);
    return b;
}

}  // namespace trace::synth
