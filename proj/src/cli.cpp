#include "trace/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string_view>

#include <CLI11.hpp>

#include "trace/config.hpp"
#include "trace/constants.hpp"
#include "trace/errors.hpp"
#include "trace/hrtree.hpp"
#include "trace/io.hpp"
#include "trace/linking.hpp"
#include "trace/metrics.hpp"
#include "trace/pipeline.hpp"
#include "trace/simd.hpp"
#include "trace/synthetic.hpp"

namespace trace::cli {
namespace {

namespace fs = std::filesystem;

const char* const kGraphsFile = "scene_graphs.jsonl";
const char* const kRelationsFile = "video_relations.jsonl";
const char* const kReportFile = "report.tsv";
const char* const kTreesFile = "trees.txt";

// Verbosity from TRACE_LOG: "quiet", "info" (default) or "debug".
enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
    const char* env = std::getenv("TRACE_LOG");
    if (!env) return LogLevel::Info;
    const std::string_view v(env);
    if (v == "quiet") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

struct Options {
    // synth
    std::size_t objects = synth::SceneSpec().objects;
    long frames = synth::SceneSpec().frames;
    std::size_t videos = synth::SceneSpec().videos;
    // shared
    std::string bundle;
    std::string out;
    std::string graphs;
    std::string relations;
    bool oracle = false;
    std::string simd = "auto";
    // config
    Config config;
    int scheme = static_cast<int>(Config().scheme);
    std::string temporal{to_string(Config().temporal_mode)};
    std::string top_down = "node";
    std::string score_mode{to_string(Config().score_mode)};
    std::string mode{to_string(Config().mode)};
    bool no_overlap_filter = false;
};

void add_config_options(CLI::App* sub, Options& o) {
    Config& c = o.config;
    sub->add_option("--scheme", o.scheme, "Center-selection scheme (1 or 2)")->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    sub->add_option("--groups", c.groups, "Tree-GRU groups")->capture_default_str();
    sub->add_option("--heads", c.heads, "Temporal attention heads")->capture_default_str();
    sub->add_option("--temporal", o.temporal, "Temporal fusion: attention, difference or none")
        ->check(CLI::IsMember({"attention", "difference", "none"}))
        ->capture_default_str();
    sub->add_option("--top-down", o.top_down, "Top-down GRU input: node or state")
        ->check(CLI::IsMember({"node", "state"}))
        ->capture_default_str();
    sub->add_option("--window", c.temporal_window, "Frames per temporal window (T)")->capture_default_str();
    sub->add_option("--temporal-stride", c.temporal_stride, "Stride between window frames (v)")
        ->capture_default_str();
    sub->add_option("--top-proposals", c.top_proposals, "Detections kept after NMS")->capture_default_str();
    sub->add_option("--k-per-pair", c.k_per_pair, "Relations kept per object pair")->capture_default_str();
    sub->add_option("--K", c.recall_ks, "Recall cut-offs")->delimiter(',')->capture_default_str();
    sub->add_option("--frame-limit", c.frame_limit, "Triplets per frame for evaluation")->capture_default_str();
    sub->add_option("--viou", c.viou_threshold, "Trajectory vIoU threshold")->capture_default_str();
    sub->add_option("--score-mode", o.score_mode, "Video score: average or maximum")
        ->check(CLI::IsMember({"average", "maximum"}))
        ->capture_default_str();
    sub->add_option("--mode", o.mode, "Evaluation mode: sgdet, sgcls or predcls")
        ->check(CLI::IsMember({"sgdet", "sgcls", "predcls"}))
        ->capture_default_str();
    sub->add_flag("--no-overlap-filter", o.no_overlap_filter, "Score every ordered pair in sgdet");
    sub->add_option("--seed", c.seed, "Seed recorded with the run")->capture_default_str();
    sub->add_option("--simd", o.simd, "Kernel backend: scalar, avx2 or auto")
        ->check(CLI::IsMember({"scalar", "avx2", "auto"}))
        ->capture_default_str();
}

Config resolve(Options& o) {
    Config c = o.config;
    c.scheme = parse_center_scheme(o.scheme);
    c.temporal_mode = parse_temporal_mode(o.temporal);
    c.top_down_input = o.top_down == "state" ? TopDownInput::BottomUpState : TopDownInput::NodeFeature;
    c.score_mode = parse_score_mode(o.score_mode);
    c.mode = parse_eval_mode(o.mode);
    c.overlap_only = !o.no_overlap_filter;
    c.validate();
    simd::select_backend(simd::parse_backend(o.simd));
    return c;
}

fs::path out_dir(const Options& o) {
    const fs::path dir = o.out.empty() ? fs::path(o.bundle) : fs::path(o.out);
    fs::create_directories(dir);
    return dir;
}

fs::path input_file(const std::string& flag_value, const fs::path& fallback) {
    const fs::path p = flag_value.empty() ? fallback : fs::path(flag_value);
    if (!fs::exists(p)) throw IngestError(p.string() + ": input file not found");
    return p;
}

void echo(std::ostream& out, const Config& config, std::vector<fs::path> inputs) {
    out << "config " << config.to_json() << "\n";
    out << "simd " << simd::backend_name(simd::active_backend()) << "\n";
    out << "inputs fnv1a64:" << io::hex_hash(io::content_hash(inputs)) << " (" << inputs.size() << " files)\n";
}

std::vector<SceneGraph> infer(const io::DatasetBundle& bundle, const Options& o, const Config& config) {
    const Model model = io::make_model(bundle, o.oracle);
    validate_model(model, config);
    std::vector<SceneGraph> graphs;
    graphs.reserve(bundle.frames.size());
    for (std::size_t i = 0; i < bundle.frames.size(); ++i)
        graphs.push_back(generate_frame_graph(io::frame_input(bundle, i, config), model, config));
    return graphs;
}

io::VideoRelationList link(const io::DatasetBundle& bundle, const std::vector<SceneGraph>& graphs,
                           const Config& config, std::size_t& dropped) {
    std::map<std::string, std::vector<SceneGraph>> by_video;
    for (const SceneGraph& g : graphs) by_video[g.video].push_back(g);
    io::VideoRelationList out;
    dropped = 0;
    for (const io::VideoInfo& v : bundle.header.videos) {
        const std::vector<SegmentTracks> tracks = io::segment_tracks(bundle, v.id);
        LinkResult r = link_video(by_video[v.id], tracks, config);
        dropped += r.dropped;
        for (VideoRelation& rel : r.relations) out.emplace_back(v.id, std::move(rel));
    }
    return out;
}

MetricReport evaluate(const io::DatasetBundle& bundle, const std::vector<SceneGraph>& graphs,
                      const io::VideoRelationList& relations, const Config& config) {
    const std::vector<FrameEval> frames = collate_frames(graphs, bundle.frame_gt);
    MetricReport report;
    for (std::size_t k : config.recall_ks)
        report.merge(recall_suite(frames, {k, config.k_per_pair, config.frame_limit, config.hit_iou}));
    report.merge(ap_suite(frames, config.k_per_pair, config.frame_limit, config.hit_iou));
    const std::vector<VideoEval> videos = collate_videos(relations, bundle.video_gt);
    const auto& c = constants();
    report.merge(video_detection_eval(videos, config.viou_threshold, c.video_recall_ks.value));
    report.merge(tagging_precision(videos, c.tagging_ks.value));
    return report;
}

void print_report(std::ostream& out, const MetricReport& report) {
    for (const auto& [k, v] : report.values) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", v * 100.0);
        out << "  " << k << "\t" << buf << "\n";
    }
}

std::string frame_header(const std::string& video, long frame) {
    return "# " + video + " frame " + std::to_string(frame) + "\n";
}

int cmd_synth(Options& o, std::ostream& out) {
    synth::SceneSpec spec;
    spec.objects = o.objects;
    spec.frames = o.frames;
    spec.videos = o.videos;
    spec.seed = o.config.seed;
    spec.groups = o.config.groups;
    const io::DatasetBundle bundle = synth::generate_scene(spec);
    io::save_bundle(bundle, o.out);
    out << "config " << o.config.to_json() << "\n";
    const std::string params = "objects=" + std::to_string(spec.objects) + " frames=" + std::to_string(spec.frames) +
                               " videos=" + std::to_string(spec.videos) + " seed=" + std::to_string(spec.seed) +
                               " groups=" + std::to_string(spec.groups);
    out << "inputs " << params << " fnv1a64:" << io::hex_hash(io::fnv1a(params)) << "\n";
    out << "synth wrote " << o.out << ": " << bundle.frames.size() << " frames, " << bundle.frame_gt.size()
        << " frame relations, " << bundle.video_gt.size() << " video relations\n";
    out << "bundle fnv1a64:" << io::hex_hash(io::content_hash(io::bundle_files(o.out))) << "\n";
    return 0;
}

int cmd_tree(Options& o, std::ostream& out) {
    const Config config = resolve(o);
    const io::DatasetBundle bundle = io::load_bundle(o.bundle);
    echo(out, config, io::bundle_files(o.bundle));
    std::string text;
    for (const io::FrameRecord& f : bundle.frames) {
        std::vector<Detection> dets;
        for (const io::DetectionRecord& d : f.detections) dets.push_back({d.box, d.class_scores, d.feature});
        if (config.mode == EvalMode::SGDet) {
            std::vector<Detection> kept;
            for (std::size_t i : per_class_nms_indices(dets, config.nms_iou, config.top_proposals))
                kept.push_back(dets[i]);
            dets = std::move(kept);
        }
        text += frame_header(f.video, f.frame);
        text += dets.empty() ? std::string("(empty)\n")
                             : format_outline(build_hrtree(dets, bundle.header.frame_width,
                                                           bundle.header.frame_height, config.scheme));
    }
    const fs::path path = out_dir(o) / kTreesFile;
    std::ofstream(path, std::ios::binary) << text;
    out << "tree wrote " << path.string() << ": " << bundle.frames.size() << " frames\n";
    return 0;
}

int cmd_infer(Options& o, std::ostream& out) {
    const Config config = resolve(o);
    const io::DatasetBundle bundle = io::load_bundle(o.bundle);
    echo(out, config, io::bundle_files(o.bundle));
    const std::vector<SceneGraph> graphs = infer(bundle, o, config);
    const fs::path path = out_dir(o) / kGraphsFile;
    io::write_scene_graphs(path, graphs);
    std::size_t triplets = 0;
    for (const SceneGraph& g : graphs) triplets += g.triplets.size();
    out << "infer wrote " << path.string() << ": " << graphs.size() << " frames, " << triplets << " triplets\n";
    return 0;
}

int cmd_link(Options& o, std::ostream& out) {
    const Config config = resolve(o);
    const io::DatasetBundle bundle = io::load_bundle(o.bundle);
    const fs::path dir = out_dir(o);
    const fs::path graphs_path = input_file(o.graphs, dir / kGraphsFile);
    std::vector<fs::path> inputs = io::bundle_files(o.bundle);
    inputs.push_back(graphs_path);
    echo(out, config, inputs);
    std::size_t dropped = 0;
    const io::VideoRelationList rels = link(bundle, io::read_scene_graphs(graphs_path), config, dropped);
    const fs::path path = dir / kRelationsFile;
    io::write_video_relations(path, rels);
    out << "link wrote " << path.string() << ": " << rels.size() << " video relations";
    if (dropped) out << " (" << dropped << " triplets without a trajectory dropped)";
    out << "\n";
    return 0;
}

int cmd_eval(Options& o, std::ostream& out) {
    const Config config = resolve(o);
    const io::DatasetBundle bundle = io::load_bundle(o.bundle);
    const fs::path dir = out_dir(o);
    const fs::path graphs_path = input_file(o.graphs, dir / kGraphsFile);
    const fs::path rels_path = input_file(o.relations, dir / kRelationsFile);
    std::vector<fs::path> inputs = io::bundle_files(o.bundle);
    inputs.push_back(graphs_path);
    inputs.push_back(rels_path);
    echo(out, config, inputs);
    const MetricReport report =
        evaluate(bundle, io::read_scene_graphs(graphs_path), io::read_video_relations(rels_path), config);
    const fs::path path = dir / kReportFile;
    io::write_report(path, report);
    out << "eval wrote " << path.string() << "\n";
    print_report(out, report);
    return 0;
}

int cmd_all(Options& o, std::ostream& out, std::ostream& err) {
    const Config config = resolve(o);
    const io::DatasetBundle bundle = io::load_bundle(o.bundle);
    echo(out, config, io::bundle_files(o.bundle));
    const fs::path dir = out_dir(o);
    const std::vector<SceneGraph> graphs = infer(bundle, o, config);
    io::write_scene_graphs(dir / kGraphsFile, graphs);
    std::size_t dropped = 0;
    const io::VideoRelationList rels = link(bundle, graphs, config, dropped);
    if (dropped && log_level() != LogLevel::Quiet)
        err << "warning: " << dropped << " triplets without a trajectory dropped\n";
    io::write_video_relations(dir / kRelationsFile, rels);
    const MetricReport report = evaluate(bundle, graphs, rels, config);
    io::write_report(dir / kReportFile, report);
    out << "all wrote " << (dir / kGraphsFile).string() << ", " << (dir / kRelationsFile).string() << ", "
        << (dir / kReportFile).string() << "\n";
    print_report(out, report);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Video scene-graph pipeline: synthetic scenes, inference, linking and evaluation", "trace"};
    app.require_subcommand(1);
    Options o;

    CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic bundle");
    synth_cmd->add_option("--out", o.out, "Bundle directory")->required();
    synth_cmd->add_option("--objects", o.objects, "Objects per video")->capture_default_str();
    synth_cmd->add_option("--frames", o.frames, "Frames per video")->capture_default_str()->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--videos", o.videos, "Videos")->capture_default_str();
    synth_cmd->add_option("--seed", o.config.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--groups", o.config.groups, "Tree-GRU groups the weights are built for")
        ->capture_default_str();

    struct Sub {
        CLI::App* app;
        bool graphs;
        bool relations;
    };
    std::vector<Sub> subs = {
        {app.add_subcommand("tree", "Dump HRTree outlines to trees.txt"), false, false},
        {app.add_subcommand("infer", "Write frame scene graphs"), false, false},
        {app.add_subcommand("link", "Link frame graphs into video relations"), true, false},
        {app.add_subcommand("eval", "Evaluate graphs and video relations"), true, true},
        {app.add_subcommand("all", "infer, link and eval in one run"), false, false},
    };
    for (const Sub& s : subs) {
        s.app->add_option("--bundle", o.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
        s.app->add_option("--out", o.out, "Output directory (default: the bundle)");
        s.app->add_flag("--oracle", o.oracle, "Use the bundle's planted oracle weights");
        if (s.graphs) s.app->add_option("--graphs", o.graphs, "Scene graphs (default: <out>/scene_graphs.jsonl)");
        if (s.relations)
            s.app->add_option("--relations", o.relations, "Video relations (default: <out>/video_relations.jsonl)");
        add_config_options(s.app, o);
    }

    auto usage = [&]() {
        for (CLI::App* sub : app.get_subcommands()) return sub->help();
        return app.help();
    };
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << usage();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << usage();
        return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(o, out);
        if (subs[0].app->parsed()) return cmd_tree(o, out);
        if (subs[1].app->parsed()) return cmd_infer(o, out);
        if (subs[2].app->parsed()) return cmd_link(o, out);
        if (subs[3].app->parsed()) return cmd_eval(o, out);
        return cmd_all(o, out, err);
    } catch (const IngestError& e) {
        err << "error: " << e.what() << "\n\n" << usage();
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n\n" << usage();
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace trace::cli
