// Acceptance suite: one PASS/FAIL line per criterion; nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles/dense.hpp"
#include "oracles/hrtree.hpp"
#include "oracles/linking.hpp"
#include "oracles/metrics.hpp"
#include "support.hpp"
#include "trace/cli.hpp"
#include "trace/contextagg.hpp"
#include "trace/hrtree.hpp"
#include "trace/io.hpp"
#include "trace/kernels.hpp"
#include "trace/linking.hpp"
#include "trace/metrics.hpp"
#include "trace/pipeline.hpp"
#include "trace/relhead.hpp"
#include "trace/simd.hpp"
#include "trace/synthetic.hpp"

using namespace trace;
namespace fs = std::filesystem;
using trace::testing::add_attention;
using trace::testing::add_gru;
using trace::testing::add_linear;
using trace::testing::add_mlp;
using trace::testing::max_abs_diff;
using trace::testing::TestRng;

namespace {

// Collects failed expectations; keeps the first few messages.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++total_;
        if (ok) return;
        ++failed_;
        if (messages_.size() < 3) messages_.push_back(what);
    }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        std::ostringstream s;
        s << (total_ - failed_) << "/" << total_ << " checks";
        for (const auto& m : messages_) s << "; " << m;
        return s.str();
    }

private:
    std::size_t total_ = 0;
    std::size_t failed_ = 0;
    std::vector<std::string> messages_;
};

using Seconds = std::chrono::duration<double>;

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("trace_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

struct Run {
    int status = 0;
    std::string out;
    std::string err;
};

Run invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Run r;
    r.status = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<Detection> random_dets(TestRng& rng, std::size_t n) {
    std::vector<Detection> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(rng.detection(4, 320, 240));
    return d;
}

// ---------------------------------------------------------------------------

Checker hrtree_structure() {
    Checker c;
    TestRng rng(1001);
    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < 120; ++t) {
        const std::size_t n = 2 + rng.index(63);
        const auto dets = random_dets(rng, n);
        for (auto scheme : {CenterScheme::Alternating, CenterScheme::TopBottom}) {
            const HRTree tree = build_hrtree(dets, 320, 240, scheme);
            const std::string tag = "n=" + std::to_string(n) + " scheme=" + std::to_string(static_cast<int>(scheme));
            c.expect(tree.leaf_count() == n, tag + ": leaf count");
            c.expect(tree.internal_count() >= 1 && tree.internal_count() <= n - 1, tag + ": non-leaf count");
            c.expect(tree.depth() <= static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n)))) + 1,
                     tag + ": depth");
            for (const HRTreeNode& node : tree.nodes)
                for (NodeId ch : node.children)
                    c.expect(node.box.contains(tree.node(ch).box), tag + ": union containment");
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const NodeId a = tree.leaves[i], b = tree.leaves[j];
                    c.expect(lca(tree, a, b) == oracle::lca_by_sets(tree, a, b), tag + ": lca");
                    c.expect(lca(tree, b, a) == lca(tree, a, b), tag + ": lca symmetry");
                }
        }
    }
    const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 1.0, "runtime " + fmt(secs) + " s");
    return c;
}

Checker proximity_oracle() {
    Checker c;
    TestRng rng(1002);
    for (int t = 0; t < 200; ++t) {
        std::vector<NodeCoord> coords(1 + rng.index(64));
        std::vector<std::array<double, 4>> f;
        for (auto& x : coords) {
            for (double& v : x) v = rng.uniform(0, 1);
            f.push_back(x);
        }
        const auto s = proximity_scores(coords);
        c.expect(s.size() == coords.size(), "score count");
        for (std::size_t k = 0; k < coords.size(); ++k)
            c.expect(std::abs(s[k] - oracle::proximity(f, k)) <= 1e-9, "layer " + std::to_string(t));
    }
    return c;
}

void kernel_checks(Checker& c, TestRng& rng, const std::string& backend) {
    // Softmax shift invariance.
    for (int t = 0; t < 200; ++t) {
        Vec v = rng.vector(1 + rng.index(12), -5, 5);
        const Vec a = softmax(v);
        c.expect(max_abs_diff(a, oracle::softmax(v)) <= 1e-5, backend + ": softmax oracle");
        const double shift = rng.uniform(-100, 100);
        for (double& x : v) x += shift;
        c.expect(max_abs_diff(a, softmax(v)) <= 1e-9, backend + ": softmax shift");
    }

    // GRU output lies between the previous state and the candidate.
    for (int t = 0; t < 1000; ++t) {
        const std::size_t in = 1 + rng.index(6), hid = 1 + rng.index(6);
        WeightStore w;
        add_gru(w, rng, "g", in, hid, 1.5);
        const Vec x = rng.vector(in, -2, 2), h = rng.vector(hid, -2, 2);
        const Vec out = gru_cell(x, h, w, "g");
        c.expect(max_abs_diff(out, oracle::gru(w, "g", x, h)) <= 1e-5, backend + ": gru oracle");
        const Vec rl = oracle::add(oracle::add(oracle::matvec(w.get("g.Wr"), x), oracle::matvec(w.get("g.Ur"), h)),
                                   oracle::bias_of(w.get("g.br")));
        Vec rh(hid);
        for (std::size_t i = 0; i < hid; ++i) rh[i] = oracle::logistic(rl[i]) * h[i];
        const Vec cl = oracle::add(oracle::add(oracle::matvec(w.get("g.Wh"), x), oracle::matvec(w.get("g.Uh"), rh)),
                                   oracle::bias_of(w.get("g.bh")));
        for (std::size_t i = 0; i < hid; ++i) {
            const double cand = std::tanh(cl[i]);
            const double lo = std::min(h[i], cand) - 1e-12, hi = std::max(h[i], cand) + 1e-12;
            c.expect(out[i] >= lo && out[i] <= hi, backend + ": gru convex bound");
        }
    }

    // Attention: each head output is a convex combination of its projected values.
    for (int t = 0; t < 100; ++t) {
        const std::size_t heads = 1 + rng.index(3), dk = 2 + rng.index(4), dq = 2 + rng.index(4);
        const std::size_t model = heads * (1 + rng.index(3));
        WeightStore w;
        add_attention(w, rng, "a", dq, dk, model, dq);
        const std::size_t steps = 1 + rng.index(8);
        std::vector<Vec> keys, vals;
        for (std::size_t s = 0; s < steps; ++s) {
            keys.push_back(rng.vector(dk));
            vals.push_back(rng.vector(dk));
        }
        const Vec q = rng.vector(dq);
        const AttentionTrace tr = multi_head_attention_trace(q, keys, vals, w, "a", heads);
        const auto ref = oracle::attention(w, "a", q, keys, vals, heads);
        c.expect(max_abs_diff(tr.output, ref.output) <= 1e-5, backend + ": attention oracle");
        for (std::size_t h = 0; h < heads; ++h) {
            double total = 0.0;
            for (double a : tr.head_weights[h]) total += a;
            c.expect(std::abs(total - 1.0) <= 1e-9, backend + ": attention weights sum");
            for (std::size_t j = 0; j < tr.head_outputs[h].size(); ++j) {
                double lo = INFINITY, hi = -INFINITY;
                for (const Vec& v : tr.head_values[h]) {
                    lo = std::min(lo, v[j]);
                    hi = std::max(hi, v[j]);
                }
                const double y = tr.head_outputs[h][j];
                c.expect(y >= lo - 1e-12 && y <= hi + 1e-12, backend + ": attention convex hull");
            }
        }
    }

    // RoIAlign: linear in the feature map, exact on constant fields.
    for (int t = 0; t < 100; ++t) {
        const std::size_t ch = 1 + rng.index(3), hh = 2 + rng.index(6), ww = 2 + rng.index(6);
        const Tensor g1 = rng.tensor({ch, hh, ww}), g2 = rng.tensor({ch, hh, ww});
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        Tensor mix({ch, hh, ww});
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * g1[i] + b * g2[i];
        const BoundingBox box = rng.box(static_cast<double>(ww), static_cast<double>(hh), 0.0,
                                        static_cast<double>(std::min(ww, hh)) - 0.5);
        const std::size_t oh = 1 + rng.index(4), ow = 1 + rng.index(4);
        const Tensor r1 = roi_align(g1, box, oh, ow), r2 = roi_align(g2, box, oh, ow), rm = roi_align(mix, box, oh, ow);
        for (std::size_t i = 0; i < rm.size(); ++i)
            c.expect(std::abs(rm[i] - (a * r1[i] + b * r2[i])) <= 1e-9, backend + ": roi_align linearity");
        c.expect(max_abs_diff(r1.values(), oracle::roi_align(g1, box.x1, box.y1, box.x2, box.y2, oh, ow).values()) <= 1e-5,
                 backend + ": roi_align oracle");
        const double k = rng.uniform(-3, 3);
        const Tensor constant({ch, hh, ww}, k);
        const Tensor rc = roi_align(constant, box, oh, ow);
        for (double v : rc.values())
            c.expect(std::abs(v - k) <= 1e-12, backend + ": roi_align constant field");
    }

    // Linear and MLP against dense arithmetic.
    for (int t = 0; t < 100; ++t) {
        const std::size_t in = 1 + rng.index(20), out = 1 + rng.index(20);
        WeightStore w;
        add_linear(w, rng, "l", out, in);
        add_mlp(w, rng, "m", {in, 1 + rng.index(9), out});
        const Vec x = rng.vector(in);
        c.expect(max_abs_diff(linear(x, w, "l"), oracle::dense(w, "l", x)) <= 1e-5, backend + ": linear oracle");
        c.expect(max_abs_diff(mlp_forward(x, w, "m"), oracle::mlp(w, "m", x)) <= 1e-5, backend + ": mlp oracle");
    }
}

Checker numeric_kernels() {
    Checker c;
    const simd::Backend before = simd::active_backend();
    std::vector<simd::Backend> backends{simd::Backend::Scalar};
    if (simd::avx2_available()) backends.push_back(simd::Backend::Avx2);
    for (simd::Backend b : backends) {
        simd::select_backend(b);
        TestRng rng(1003);
        kernel_checks(c, rng, std::string(simd::backend_name(b)));
    }
    simd::select_backend(before);
    return c;
}

Checker aggregation_locality() {
    Checker c;
    TestRng rng(1004);
    const std::size_t groups = 2, width = 3;
    for (int t = 0; t < 50; ++t) {
        WeightStore w;
        for (std::size_t g = 0; g < groups; ++g) {
            add_gru(w, rng, "prop.g" + std::to_string(g) + ".up", width, width);
            add_gru(w, rng, "prop.g" + std::to_string(g) + ".down", width, width);
        }
        add_mlp(w, rng, "prop.mlp", {2 * groups * width, 4});
        const HRTree tree = build_hrtree(random_dets(rng, 2 + rng.index(15)), 320, 240,
                                         t % 2 ? CenterScheme::Alternating : CenterScheme::TopBottom);
        NodeFeatures x;
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) x.push_back(rng.vector(groups * width));
        for (auto mode : {TopDownInput::NodeFeature, TopDownInput::BottomUpState}) {
            const PropagationOptions opt{groups, mode, "prop"};
            const PropagationStates base = propagate_states(tree, x, w, opt);
            for (NodeId other = 0; other < tree.nodes.size(); ++other) {
                NodeFeatures y = x;
                for (double& v : y[other]) v += rng.uniform(0.5, 2.0);
                const PropagationStates pert = propagate_states(tree, y, w, opt);
                const std::set<NodeId> up_of_other = oracle::ancestors(tree, other);
                for (NodeId target = 0; target < tree.nodes.size(); ++target) {
                    const bool in_subtree = other == target || up_of_other.count(target) > 0;
                    const bool on_path = other == target || oracle::ancestors(tree, target).count(other) > 0;
                    for (std::size_t g = 0; g < groups; ++g) {
                        if (!in_subtree)
                            c.expect(pert.bottom_up[g][target] == base.bottom_up[g][target], "bottom-up changed");
                        if (!on_path && mode == TopDownInput::NodeFeature)
                            c.expect(pert.top_down[g][target] == base.top_down[g][target], "top-down changed");
                    }
                }
            }
        }
    }
    return c;
}

Checker head_contract() {
    Checker c;
    TestRng rng(1005);
    for (int t = 0; t < 200; ++t) {
        const std::size_t rels = 1 + rng.index(30);
        std::vector<BranchLogits> b;
        for (const char* n : {"visual", "fusion", "subject_object", "prior"}) b.push_back({n, rng.vector(rels, -8, 8)});
        const Vec got = fuse_scores(b);
        for (std::size_t r = 0; r < rels; ++r) {
            double acc = 0.0;
            for (const auto& x : b) acc += x.values[r];
            c.expect(std::abs(got[r] - oracle::logistic(acc)) <= 1e-9, "fuse_scores");
        }

        const std::size_t objs = 1 + rng.index(6);
        FrequencyTable table(objs, rels);
        for (std::size_t i = rng.index(40); i > 0; --i) table.add(rng.index(objs), rng.index(objs), rng.index(rels), rng.index(50));
        double total = 0.0;
        for (double v : prior_branch(rng.index(objs), rng.index(objs), table, rng.uniform(0.05, 3.0)).values)
            total += std::exp(v);
        c.expect(std::abs(total - 1.0) <= 1e-9, "prior normalization " + fmt(total));

        const std::size_t ch = 1 + rng.index(5), red = 1 + rng.index(5);
        WeightStore w;
        add_linear(w, rng, "vis.reduce", red, ch);
        add_mlp(w, rng, "vis.mlp", {3 * ch, 4, rels});
        const Tensor map = rng.tensor({ch, 1 + rng.index(5), 1 + rng.index(5)});
        const VisualBranchResult vb = visual_branch(map, rng.vector(red), rng.vector(red), w);
        double ss = 0.0, so = 0.0;
        for (double a : vb.subject_attention) ss += a;
        for (double a : vb.object_attention) so += a;
        c.expect(std::abs(ss - 1.0) <= 1e-9 && std::abs(so - 1.0) <= 1e-9, "visual softmax map sum");
        c.expect(vb.logits.values.size() == rels, "visual logits width");
    }
    return c;
}

Trajectory steady(long begin, long end, BoundingBox b) {
    Trajectory t{begin, {}};
    for (long f = begin; f < end; ++f) t.boxes.push_back(b);
    return t;
}

struct LinkInstance {
    std::vector<std::vector<SegmentTriplet>> segs;
    std::vector<Segment> bounds;
};

LinkInstance link_instance(TestRng& rng, bool unique_categories) {
    LinkInstance in;
    in.bounds = {{0, 0, 30}, {1, 15, 45}, {2, 30, 60}};
    in.segs.resize(3);
    for (std::size_t s = 0; s < 3; ++s) {
        const std::size_t n = unique_categories ? 4 : 1 + rng.index(5);
        for (std::size_t i = 0; i < n; ++i) {
            SegmentTriplet t;
            t.segment = s;
            t.subj_id = i;
            t.obj_id = 10 + i;
            t.subj_class = t.obj_class = unique_categories ? i : rng.index(2);
            t.rel_class = unique_categories ? 0 : rng.index(2);
            t.score = static_cast<double>(1 + rng.index(10)) / 10.0;
            const double dx = rng.uniform(0, 10), dy = rng.uniform(0, 10);
            const double ex = rng.uniform(0, 10), ey = rng.uniform(0, 10);
            t.subj_traj = steady(in.bounds[s].begin, in.bounds[s].end, {dx, dy, dx + 20, dy + 20});
            t.obj_traj = steady(in.bounds[s].begin, in.bounds[s].end, {40 + ex, ey, 60 + ex, ey + 20});
            in.segs[s].push_back(t);
        }
    }
    return in;
}

Checker linking_suite() {
    Checker c;
    TestRng rng(1006);
    for (int t = 0; t < 100; ++t) {
        const LinkInstance in = link_instance(rng, false);
        const auto avg = associate_segments(in.segs, in.bounds, 0.5, ScoreMode::Average);
        const auto mx = associate_segments(in.segs, in.bounds, 0.5, ScoreMode::Maximum);
        c.expect(avg.size() == mx.size(), "chain sets differ by score mode");
        std::multiset<std::pair<std::size_t, std::size_t>> seen, all;
        for (std::size_t i = 0; i < avg.size() && i < mx.size(); ++i) {
            c.expect(mx[i].score >= avg[i].score - 1e-12, "max below average");
            for (const auto& m : avg[i].members) seen.insert(m);
        }
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t i = 0; i < in.segs[s].size(); ++i) all.insert({s, i});
        c.expect(seen == all, "chains do not partition the triplets");
        for (double thr : {0.3, 0.5, 0.7}) {
            std::vector<std::vector<std::pair<std::size_t, std::size_t>>> chains;
            for (const auto& r : associate_segments(in.segs, in.bounds, thr, ScoreMode::Average))
                chains.push_back(r.members);
            c.expect(chains == oracle::greedy_chains(in.segs, in.bounds, thr), "greedy oracle mismatch");
        }
    }
    // Monotonicity in the threshold, on instances with one triplet per category per segment.
    for (int t = 0; t < 100; ++t) {
        const LinkInstance in = link_instance(rng, true);
        std::size_t prev = 0;
        for (double thr : {0.3, 0.5, 0.7}) {
            const std::size_t n = associate_segments(in.segs, in.bounds, thr, ScoreMode::Average).size();
            c.expect(n >= prev, "chain count fell as the threshold rose");
            prev = n;
        }
    }
    return c;
}

std::vector<FrameEval> tiny_instance(TestRng& rng) {
    std::vector<FrameEval> frames;
    const std::size_t nf = 1 + rng.index(4);
    for (std::size_t f = 0; f < nf; ++f) {
        FrameEval fe;
        fe.video = rng.coin() ? "a" : "b";
        fe.frame = static_cast<long>(f);
        std::vector<BoundingBox> boxes;
        for (int i = 0; i < 4; ++i) boxes.push_back(rng.box(100, 100, 10, 40));
        for (std::size_t g = rng.index(7); g > 0; --g)
            fe.ground_truth.push_back({fe.video, fe.frame, rng.index(2), rng.index(2), rng.index(3),
                                       boxes[rng.index(4)], boxes[rng.index(4)]});
        for (std::size_t p = rng.index(12); p > 0; --p) {
            FramePrediction q;
            q.subj_idx = rng.index(4);
            q.obj_idx = rng.index(4);
            q.subj_class = rng.index(2);
            q.obj_class = rng.index(2);
            q.rel_class = rng.index(3);
            q.score = static_cast<double>(rng.index(5)) / 4.0;
            q.subj_box = rng.coin(0.7) ? boxes[q.subj_idx] : rng.box(100, 100, 10, 40);
            q.obj_box = rng.coin(0.7) ? boxes[q.obj_idx] : rng.box(100, 100, 10, 40);
            fe.predictions.push_back(q);
        }
        frames.push_back(fe);
    }
    return frames;
}

void compare_frame_metrics(Checker& c, const std::vector<FrameEval>& frames, std::size_t K, std::size_t kpp,
                           std::size_t limit, const std::string& tag) {
    RecallOptions opt;
    opt.k = K;
    opt.k_per_pair = kpp;
    opt.frame_limit = limit;
    const MetricReport r = recall_suite(frames, opt);
    const oracle::RecallRef ref = oracle::recall_ref(frames, K, kpp, limit, opt.hit_iou);
    const std::string k = std::to_string(K);
    c.expect(r.values.at("R@" + k + "/image") == ref.image, tag + ": R@K/image");
    c.expect(r.values.at("R@" + k + "/video") == ref.video, tag + ": R@K/video");
    c.expect(r.values.at("mR@" + k + "/image") == ref.mean_image, tag + ": mR@K/image");
    c.expect(r.values.at("mR@" + k + "/video") == ref.mean_video, tag + ": mR@K/video");
    const MetricReport a = ap_suite(frames, kpp, limit, opt.hit_iou);
    const oracle::ApRef aref = oracle::ap_suite_ref(frames, kpp, limit, opt.hit_iou);
    c.expect(a.values.at("mAP_rel") == aref.map, tag + ": mAP_rel " + fmt(a.values.at("mAP_rel")) + " vs " + fmt(aref.map));
    c.expect(a.values.at("wmAP_rel") == aref.wmap, tag + ": wmAP_rel");
}

Checker metric_oracles() {
    Checker c;
    TestRng rng(1007);
    for (int t = 0; t < 100; ++t) {
        const auto frames = tiny_instance(rng);
        for (std::size_t K : {1u, 3u, 20u}) compare_frame_metrics(c, frames, K, 2, 6, "instance " + std::to_string(t));
    }
    c.expect(std::abs(average_precision({true, false, true}, 2) - 0.8333333) <= 1e-6, "[TP,FP,TP] over 2 GT");
    return c;
}

std::vector<FramePrediction> as_predictions(const std::vector<TripletPrediction>& ts) {
    std::vector<FramePrediction> out;
    for (const auto& t : ts) out.push_back({t.subj_idx, t.obj_idx, t.subj_class, t.obj_class, t.rel_class, t.score, {}, {}});
    return out;
}

Checker protocol_constants() {
    Checker c;
    const ProtocolConstants& k = constants();
    c.expect(k.k_per_pair_frame_level.value == std::array<std::size_t, 2>{6, 7}, "k_per_pair frame level");
    c.expect(k.k_per_pair_video_level.value == 20, "k_per_pair video level");
    c.expect(k.frame_triplet_limit.value == 50, "frame limit");
    c.expect(k.temporal_window.value == 8 && k.temporal_stride.value == 4, "T and v");
    c.expect(k.top_proposals.value == 100 && k.nms_iou.value == 0.5, "proposal settings");
    c.expect(k.hit_iou.value == 0.5 && k.viou.value == 0.5, "matching thresholds");
    c.expect(k.segment_length.value == 30 && k.segment_interval.value == 15, "segment settings");
    c.expect(k.group_options.value == std::array<std::size_t, 2>{2, 4}, "group options");
    c.expect(k.k_per_pair_frame_level.source.find("per object pair") != std::string_view::npos &&
                 k.k_per_pair_video_level.source.find("per pair") != std::string_view::npos &&
                 k.frame_triplet_limit.source.find("triplets per frame") != std::string_view::npos &&
                 k.segment_length.source.find("frames per segment") != std::string_view::npos &&
                 k.segment_interval.source.find("between segment starts") != std::string_view::npos &&
                 k.top_proposals.source.find("proposals") != std::string_view::npos,
             "citation text");

    // Enough relation classes that every cap binds.
    for (bool oracle_weights : {false, true}) {
        synth::SceneSpec spec;
        spec.objects = 5;
        spec.frames = 6;
        spec.seed = 11;
        spec.relation_classes = 26;
        const io::DatasetBundle bundle = synth::generate_scene(spec);
        const Model model = io::make_model(bundle, oracle_weights);
        Config full_cfg;
        full_cfg.k_per_pair = spec.relation_classes;
        std::map<std::size_t, std::vector<SceneGraph>> graphs;
        bool altered = false, limited = false;
        for (std::size_t f = 0; f < bundle.frames.size(); ++f) {
            const FrameInput in = io::frame_input(bundle, f, full_cfg);
            const SceneGraph full = generate_frame_graph(in, model, full_cfg);
            std::map<std::size_t, std::size_t> sizes;
            for (std::size_t kpp : {6u, 7u, 20u}) {
                Config cfg;
                cfg.k_per_pair = kpp;
                const SceneGraph g = generate_frame_graph(in, model, cfg);
                const auto expect = oracle::capped(as_predictions(full.triplets), kpp, full.triplets.size());
                const auto got = as_predictions(g.triplets);
                bool same = got.size() == expect.size();
                for (std::size_t i = 0; same && i < got.size(); ++i)
                    same = got[i].subj_idx == expect[i].subj_idx && got[i].obj_idx == expect[i].obj_idx &&
                           got[i].rel_class == expect[i].rel_class && got[i].score == expect[i].score;
                c.expect(same, "k_per_pair " + std::to_string(kpp) + " output differs from the capped oracle");
                sizes[kpp] = g.triplets.size();
                limited |= g.triplets.size() > k.frame_triplet_limit.value;
                graphs[kpp].push_back(g);
            }
            altered |= sizes[6] < sizes[7] && sizes[7] < sizes[20];
        }
        c.expect(altered, "caps did not change the outputs");
        c.expect(limited, "frame limit never binds");
        for (std::size_t kpp : {6u, 7u, 20u}) {
            const auto frames = collate_frames(graphs[kpp], bundle.frame_gt);
            for (std::size_t K : k.recall_ks.value)
                compare_frame_metrics(c, frames, K, kpp, k.frame_triplet_limit.value,
                                      "metrics at k_per_pair " + std::to_string(kpp));
            // Metrics on the uncapped list apply the same caps.
            const auto uncapped = collate_frames(graphs[20], bundle.frame_gt);
            compare_frame_metrics(c, uncapped, k.recall_ks.value[1], kpp, k.frame_triplet_limit.value,
                                  "metric caps at k_per_pair " + std::to_string(kpp));
        }
    }
    return c;
}

Checker end_to_end() {
    Checker c;
    TempDir a("e2e_a"), b("e2e_b");
    const auto start = std::chrono::steady_clock::now();
    const Run s1 = invoke({"synth", "--out", a / "bundle", "--objects", "5", "--frames", "60", "--seed", "7"});
    const Run r1 = invoke({"all", "--bundle", a / "bundle", "--oracle"});
    const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
    c.expect(s1.status == 0 && r1.status == 0, "exit status " + std::to_string(s1.status) + "/" +
                                                     std::to_string(r1.status) + ": " + s1.err + r1.err);
    c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
    if (r1.status != 0) return c;
    const auto report = io::read_report(a.path / "bundle" / "report.tsv");
    auto value = [&](const std::string& key) { return report.count(key) ? report.at(key) : -1.0; };
    c.expect(value("R@20/image") == 100.0, "Recall@20 " + fmt(value("R@20/image")));
    c.expect(value("mAP_rel") == 100.0, "mAP_rel " + fmt(value("mAP_rel") / 100.0));
    c.expect(value("video/mAP") == 100.0, "video mAP " + fmt(value("video/mAP") / 100.0));
    c.expect(value("tag/P@1") == 100.0, "tagging P@1 " + fmt(value("tag/P@1") / 100.0));

    const auto first = snapshot(a.path / "bundle");
    const Run r2 = invoke({"all", "--bundle", a / "bundle", "--oracle"});
    c.expect(r2.status == 0 && r2.out == r1.out, "rerun output differs");
    c.expect(snapshot(a.path / "bundle") == first, "rerun files differ");

    const Run s3 = invoke({"synth", "--out", b / "bundle", "--objects", "5", "--frames", "60", "--seed", "7"});
    const Run r3 = invoke({"all", "--bundle", b / "bundle", "--oracle"});
    c.expect(s3.status == 0 && r3.status == 0, "second directory run failed");
    c.expect(snapshot(b.path / "bundle") == first, "fresh directory files differ");
    return c;
}

Checker degenerate_inputs() {
    Checker c;
    // Frames with zero and one detection.
    synth::SceneSpec spec;
    spec.objects = 3;
    spec.frames = 4;
    const io::DatasetBundle bundle = synth::generate_scene(spec);
    const Model model = io::make_model(bundle, false);
    const Config cfg;
    FrameInput f = io::frame_input(bundle, 0, cfg);
    f.detections.clear();
    f.detection_features.clear();
    const SceneGraph none = generate_frame_graph(f, model, cfg);
    c.expect(none.detections.empty() && none.triplets.empty(), "zero detections");
    f = io::frame_input(bundle, 0, cfg);
    f.detections.resize(1);
    f.detection_features.resize(1);
    const SceneGraph one = generate_frame_graph(f, model, cfg);
    c.expect(one.detections.size() == 1 && one.triplets.empty(), "one detection");

    // Single-step volumes on the attention path.
    Config t1;
    t1.temporal_window = 1;
    const FrameInput fin = io::frame_input(bundle, 2, t1);
    const SceneGraph g1 = generate_frame_graph(fin, model, t1);
    bool finite = !g1.triplets.empty();
    for (const auto& t : g1.triplets) finite &= std::isfinite(t.score);
    c.expect(fin.volume.steps() == 1 && finite, "T=1 graph");

    // Empty prediction sets.
    const MetricReport r = recall_suite(std::vector<FrameEval>{}, RecallOptions{});
    for (const auto& [k, v] : r.values) c.expect(v == 0.0, "empty recall " + k);
    const std::vector<std::size_t> ns{50, 100};
    const MetricReport v = video_detection_eval(std::vector<VideoEval>{}, 0.5, ns);
    c.expect(v.values.at("video/mAP") == 0.0, "empty video eval");
    c.expect(associate_segments({}, {}, 0.5, ScoreMode::Average).empty(), "empty association");

    // Same cases through the command line.
    TempDir dir("degenerate");
    for (const char* objects : {"0", "1"}) {
        const std::string b = dir / (std::string("objects") + objects);
        const Run s = invoke({"synth", "--out", b, "--objects", objects, "--frames", "20"});
        const Run a = invoke({"all", "--bundle", b});
        c.expect(s.status == 0 && a.status == 0, std::string("objects=") + objects + ": " + s.err + a.err);
    }
    const std::string b = dir / "small";
    c.expect(invoke({"synth", "--out", b, "--objects", "4", "--frames", "20"}).status == 0, "synth");
    const Run w = invoke({"all", "--bundle", b, "--window", "1", "--temporal", "attention", "--out", dir / "t1"});
    c.expect(w.status == 0, "T=1 run: " + w.err);
    std::ofstream(dir.path / "graphs.jsonl");
    std::ofstream(dir.path / "rels.jsonl");
    const Run e = invoke({"eval", "--bundle", b, "--graphs", dir / "graphs.jsonl", "--relations", dir / "rels.jsonl",
                          "--out", dir / "eval"});
    c.expect(e.status == 0, "empty eval: " + e.err);
    if (e.status == 0)
        for (const auto& [k, val] : io::read_report(dir.path / "eval" / "report.tsv"))
            c.expect(val == 0.0, "empty eval " + k);
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Checker()>>> criteria{
        {"HRTree structure and LCA", hrtree_structure},
        {"proximity scores match the double loop", proximity_oracle},
        {"numeric kernels", numeric_kernels},
        {"aggregation locality", aggregation_locality},
        {"relation head contract", head_contract},
        {"temporal linking", linking_suite},
        {"frame metrics match brute force", metric_oracles},
        {"protocol constants and caps", protocol_constants},
        {"end to end on the synthetic scene", end_to_end},
        {"degenerate inputs", degenerate_inputs},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& [name, fn] = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        std::string status, detail;
        try {
            const Checker c = fn();
            status = c.ok() ? "PASS" : "FAIL";
            detail = c.summary();
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = std::string("exception: ") + e.what();
        }
        const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
        if (status != "PASS") ++failures;
        std::cout << status << " criterion " << (i + 1) << ": " << name << " (" << detail << ", " << fmt(secs)
                  << " s)" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
