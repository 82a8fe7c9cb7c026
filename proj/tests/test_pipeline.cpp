#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "trace/errors.hpp"
#include "trace/io.hpp"
#include "trace/pipeline.hpp"
#include "trace/synthetic.hpp"

using namespace trace;
using trace::testing::TestRng;

namespace {

struct Fixture {
    io::DatasetBundle bundle;
    Config config;
    Model model;

    explicit Fixture(std::size_t objects, bool oracle = false, std::uint64_t seed = 3, std::size_t groups = 0) {
        synth::SceneSpec spec;
        spec.objects = objects;
        if (groups != 0) spec.groups = groups;
        spec.frames = 12;
        spec.seed = seed;
        bundle = synth::generate_scene(spec);
        model = io::make_model(bundle, oracle);
    }

    FrameInput frame(std::size_t index = 0) const { return io::frame_input(bundle, index, config); }
};

// Straight-line composition of the module operations for one frame.
std::vector<TripletPrediction> scripted(const FrameInput& f, const Model& m, const Config& c) {
    const std::vector<std::size_t> kept = per_class_nms_indices(f.detections, c.nms_iou, c.top_proposals);
    std::vector<Detection> dets;
    for (std::size_t k : kept) dets.push_back(f.detections[k]);
    const HRTree tree = build_hrtree(dets, f.frame_width, f.frame_height, c.scheme);
    const NodeFeatures inputs = node_input_features(f, tree, kept, m, c);
    const NodeFeatures ctx = spatial_propagate(tree, inputs, m.weights, {c.groups, c.top_down_input, "prop"});
    std::vector<TripletPrediction> out;
    for (std::size_t i = 0; i < dets.size(); ++i)
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (i == j || intersection_area(dets[i].box, dets[j].box) <= 0.0) continue;
            const NodeId li = tree.leaves[i], lj = tree.leaves[j];
            const BoundingBox u = union_box(dets[i].box, dets[j].box);
            const Tensor rel = roi_align(f.grid.tensor, u.scaled(1.0 / f.grid.stride), c.relation_pool.height,
                                         c.relation_pool.width);
            std::vector<BranchLogits> b;
            b.push_back(visual_branch(rel, linear(ctx[li], m.weights, "vis.subj_proj"),
                                      linear(ctx[lj], m.weights, "vis.obj_proj"), m.weights)
                            .logits);
            b.push_back(fusion_branch(dets[i].class_scores, dets[j].class_scores, m.embedding, ctx[lca(tree, li, lj)],
                                      m.weights));
            b.push_back(subject_object_branch(ctx[li], ctx[lj], m.weights));
            b.push_back(prior_branch(dets[i].argmax_class(), dets[j].argmax_class(), m.frequency, c.prior_alpha));
            const Vec s = fuse_scores(b);
            std::vector<std::size_t> r(s.size());
            std::iota(r.begin(), r.end(), std::size_t{0});
            std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t z) { return s[a] > s[z]; });
            for (std::size_t k = 0; k < std::min(c.k_per_pair, r.size()); ++k)
                out.push_back({i, j, dets[i].argmax_class(), dets[j].argmax_class(), r[k], s[r[k]]});
        }
    std::sort(out.begin(), out.end(), triplet_before);
    return out;
}

}  // namespace

TEST_CASE("pair enumeration") {
    Detection a{{0, 0, 10, 10}, {1.0}, ""}, b{{5, 5, 15, 15}, {1.0}, ""}, far{{50, 50, 60, 60}, {1.0}, ""};
    const std::vector<Detection> two{a, b};
    CHECK(enumerate_pairs(two, false) == std::vector<IndexPair>{{0, 1}, {1, 0}});
    const std::vector<Detection> apart{a, far};
    CHECK(enumerate_pairs(apart, true).empty());
    Detection touch{{10, 0, 20, 10}, {1.0}, ""};
    CHECK(enumerate_pairs(std::vector<Detection>{a, touch}, true).empty());

    TestRng rng(71);
    for (int t = 0; t < 50; ++t) {
        std::vector<Detection> d;
        for (int i = 0; i < 5; ++i) d.push_back(rng.detection(2, 100, 100));
        std::set<IndexPair> expect;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                const double w = std::min(d[i].box.x2, d[j].box.x2) - std::max(d[i].box.x1, d[j].box.x1);
                const double h = std::min(d[i].box.y2, d[j].box.y2) - std::max(d[i].box.y1, d[j].box.y1);
                if (i != j && w > 0 && h > 0) expect.insert({i, j});
            }
        const auto got = enumerate_pairs(d, true);
        CHECK(std::set<IndexPair>(got.begin(), got.end()) == expect);
        CHECK(enumerate_pairs(d, false).size() == 20);
    }
}

TEST_CASE("zero and one detection frames") {
    Fixture fx(3);
    FrameInput f = fx.frame();
    f.detections.clear();
    f.detection_features.clear();
    const SceneGraph empty = generate_frame_graph(f, fx.model, fx.config);
    CHECK(empty.detections.empty());
    CHECK(empty.triplets.empty());

    FrameInput g = fx.frame();
    g.detections.resize(1);
    g.detection_features.resize(1);
    const SceneGraph one = generate_frame_graph(g, fx.model, fx.config);
    CHECK(one.detections.size() == 1);
    CHECK(one.triplets.empty());
}

TEST_CASE("frame graph equals the scripted composition") {
    for (bool oracle : {false, true}) {
        Fixture fx(3, oracle);
        for (std::size_t idx : {0u, 5u, 11u}) {
            const FrameInput f = fx.frame(idx);
            const SceneGraph g = generate_frame_graph(f, fx.model, fx.config);
            CHECK(g.triplets == scripted(f, fx.model, fx.config));
            CHECK(!g.triplets.empty());
            CHECK(std::is_sorted(g.triplets.begin(), g.triplets.end(), triplet_before));
        }
    }
}

TEST_CASE("scripted composition holds across configurations") {
    for (int scheme : {1, 2})
        for (std::size_t groups : {2u, 4u}) {
            const Fixture fx(5, false, 3, groups);
            for (auto mode : {TemporalMode::Attention, TemporalMode::Difference, TemporalMode::None}) {
                Config c;
                c.scheme = parse_center_scheme(scheme);
                c.groups = groups;
                c.temporal_mode = mode;
                c.top_down_input = groups == 2 ? TopDownInput::BottomUpState : TopDownInput::NodeFeature;
                const FrameInput f = io::frame_input(fx.bundle, 3, c);
                CHECK(generate_frame_graph(f, fx.model, c).triplets == scripted(f, fx.model, c));
            }
        }
}

TEST_CASE("per-pair cap and overlap filter") {
    Fixture fx(5);
    Config c;
    c.k_per_pair = 2;
    const SceneGraph g = generate_frame_graph(fx.frame(), fx.model, c);
    std::map<IndexPair, std::size_t> per_pair;
    for (const auto& t : g.triplets) {
        ++per_pair[{t.subj_idx, t.obj_idx}];
        CHECK(intersection_area(g.detections[t.subj_idx].box, g.detections[t.obj_idx].box) > 0.0);
    }
    for (const auto& [p, n] : per_pair) CHECK(n == 2);

    c.overlap_only = false;
    const SceneGraph all = generate_frame_graph(fx.frame(), fx.model, c);
    const std::size_t n = all.detections.size();
    CHECK(all.triplets.size() == n * (n - 1) * 2);
}

TEST_CASE("predcls uses labels and listed pairs only") {
    Fixture fx(5);
    Config c;
    c.mode = EvalMode::PredCls;
    FrameInput f = fx.frame();
    REQUIRE(f.labels);
    f.pairs = std::vector<IndexPair>{{0, 1}, {3, 2}};
    const SceneGraph g = generate_frame_graph(f, fx.model, c);
    CHECK(g.detections.size() == f.detections.size());
    for (const auto& t : g.triplets) {
        CHECK(((t.subj_idx == 0 && t.obj_idx == 1) || (t.subj_idx == 3 && t.obj_idx == 2)));
        CHECK(t.subj_class == (*f.labels)[t.subj_idx]);
    }
    CHECK(g.triplets.size() == 2 * std::min<std::size_t>(c.k_per_pair, 5));

    f.pairs = std::vector<IndexPair>{{0, 0}};
    CHECK_THROWS_AS(generate_frame_graph(f, fx.model, c), IngestError);
    f.pairs.reset();
    f.labels.reset();
    CHECK_THROWS_AS(generate_frame_graph(f, fx.model, c), IngestError);
}

TEST_CASE("sgcls keeps every box and predicts classes") {
    Fixture fx(5);
    Config c;
    c.mode = EvalMode::SGCls;
    const FrameInput f = fx.frame();
    const SceneGraph g = generate_frame_graph(f, fx.model, c);
    CHECK(g.detections.size() == f.detections.size());
    for (std::size_t i = 0; i < g.classes.size(); ++i) CHECK(g.classes[i] == f.detections[i].argmax_class());
}

TEST_CASE("model validation") {
    Fixture fx(3);
    CHECK_NOTHROW(validate_model(fx.model, fx.config));
    const ModelDims d = validate_model(fx.model, fx.config);
    CHECK(d.object_classes == 6);
    CHECK(d.relation_classes == 5);

    Model broken = fx.model;
    WeightStore w;
    for (const auto& [name, t] : fx.model.weights.entries())
        if (name != "fusion.mlp.1.weight") w.insert(name, t);
    broken.weights = w;
    try {
        validate_model(broken, fx.config);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("fusion.mlp") != std::string::npos);
    }

    Config bad = fx.config;
    bad.heads = 5;
    CHECK_THROWS_AS(validate_model(fx.model, bad), ConfigError);
    bad = fx.config;
    bad.groups = 3;
    CHECK_THROWS_AS(validate_model(fx.model, bad), ConfigError);

    Model wrong_freq = fx.model;
    wrong_freq.frequency = FrequencyTable(4, 5);
    CHECK_THROWS_AS(validate_model(wrong_freq, fx.config), ConfigError);
}

TEST_CASE("single-step volume on the attention path") {
    Fixture fx(5);
    Config c;
    c.temporal_window = 1;
    const FrameInput f = io::frame_input(fx.bundle, 4, c);
    CHECK(f.volume.steps() == 1);
    const SceneGraph g = generate_frame_graph(f, fx.model, c);
    CHECK(!g.triplets.empty());
    for (const auto& t : g.triplets) CHECK(std::isfinite(t.score));

    Config mismatch;
    CHECK_THROWS_AS(generate_frame_graph(f, fx.model, mismatch), ConfigError);
}

TEST_CASE("config validation") {
    Config c;
    CHECK_NOTHROW(c.validate());
    c.hit_iou = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = Config{};
    c.k_per_pair = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = Config{};
    c.temporal_mode = TemporalMode::Difference;
    c.temporal_window = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(parse_eval_mode("sgdett"), ConfigError);
    CHECK(parse_score_mode("maximum") == ScoreMode::Maximum);
    CHECK(Config{}.to_json() == Config{}.to_json());
    CHECK(Config{}.to_json().find("\"T\":8") != std::string::npos);
}
