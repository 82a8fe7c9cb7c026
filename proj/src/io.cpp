#include "trace/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "trace/errors.hpp"

namespace trace::io {
namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'T', 'R', 'C', 'E'};

const char* const kHeaderFile = "bundle.json";
const char* const kFramesFile = "frames.jsonl";
const char* const kPairsFile = "pairs.jsonl";
const char* const kFeaturesFile = "features.trce";
const char* const kWeightsFile = "weights.trce";
const char* const kOracleWeightsFile = "oracle_weights.trce";
const char* const kManifestFile = "weights.manifest.jsonl";
const char* const kEmbeddingFile = "embedding.trce";
const char* const kFrequencyFile = "frequency.jsonl";
const char* const kTracksFile = "tracks.jsonl";
const char* const kTrackMapFile = "track_map.jsonl";
const char* const kFrameGtFile = "gt_frames.jsonl";
const char* const kVideoGtFile = "gt_videos.jsonl";
const char* const kEmbeddingTensor = "embedding";

// ---------------------------------------------------------------------------
// Little-endian primitives

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFFu));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

class ByteReader {
public:
    ByteReader(std::string data, std::string file) : data_(std::move(data)), file_(std::move(file)) {}

    bool done() const noexcept { return pos_ >= data_.size(); }

    std::uint8_t u8(const std::string& what) { return static_cast<std::uint8_t>(take(1, what)[0]); }
    std::uint16_t u16(const std::string& what) {
        const char* p = take(2, what);
        return static_cast<std::uint16_t>(byte(p, 0) | (byte(p, 1) << 8));
    }
    std::uint32_t u32(const std::string& what) {
        const char* p = take(4, what);
        return byte(p, 0) | (byte(p, 1) << 8) | (byte(p, 2) << 16) | (byte(p, 3) << 24);
    }
    std::string bytes(std::size_t n, const std::string& what) { return std::string(take(n, what), n); }

private:
    static std::uint32_t byte(const char* p, int i) { return static_cast<std::uint8_t>(p[i]); }

    const char* take(std::size_t n, const std::string& what) {
        if (data_.size() - pos_ < n) throw IngestError(file_ + ": truncated while reading " + what);
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::string data_;
    std::string file_;
    std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(path.string() + ": cannot open");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError(path.string() + ": cannot open for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IngestError(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// JSON Lines

struct Line {
    std::size_t number;
    json value;
};

std::vector<Line> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError(path.string() + ": cannot open");
    std::vector<Line> out;
    std::string text;
    std::size_t number = 0;
    while (std::getline(in, text)) {
        ++number;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back({number, json::parse(text)});
        } catch (const json::parse_error& e) {
            throw IngestError(path.filename().string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
    std::string data;
    for (const json& r : records) {
        data += r.dump();
        data += '\n';
    }
    write_file(path, data);
}

// Wraps field access so that errors cite "file:line".
class Record {
public:
    Record(const json& value, std::string locator) : value_(value), locator_(std::move(locator)) {}

    const std::string& locator() const noexcept { return locator_; }

    const json& field(const char* key) const {
        if (!value_.is_object() || !value_.contains(key)) fail(std::string("missing field '") + key + "'");
        return value_.at(key);
    }
    bool has(const char* key) const { return value_.is_object() && value_.contains(key); }

    template <class T>
    T get(const char* key) const {
        try {
            return field(key).get<T>();
        } catch (const json::exception&) {
            fail(std::string("field '") + key + "' has the wrong type");
        }
    }

    [[noreturn]] void fail(const std::string& message) const { throw IngestError(locator_ + ": " + message); }

private:
    const json& value_;
    std::string locator_;
};

std::string locator(const fs::path& path, std::size_t line) {
    return path.filename().string() + ":" + std::to_string(line);
}

json box_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

BoundingBox box_from(const json& j, const Record& rec, const char* what) {
    if (!j.is_array() || j.size() != 4) rec.fail(std::string(what) + " must be [x1, y1, x2, y2]");
    try {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    } catch (const json::exception&) {
        rec.fail(std::string(what) + " must hold numbers");
    }
}

json traj_json(const Trajectory& t) {
    json boxes = json::array();
    for (const BoundingBox& b : t.boxes) boxes.push_back(box_json(b));
    return json{{"start_frame", t.start_frame}, {"boxes", boxes}};
}

Trajectory traj_from(const json& j, const Record& rec, const char* what) {
    if (!j.is_object() || !j.contains("start_frame") || !j.contains("boxes") || !j["boxes"].is_array())
        rec.fail(std::string(what) + " must be {start_frame, boxes}");
    Trajectory t;
    t.start_frame = j["start_frame"].get<long>();
    for (const json& b : j["boxes"]) t.boxes.push_back(box_from(b, rec, what));
    return t;
}

std::vector<double> numbers_from(const json& j, const Record& rec, const char* what) {
    try {
        return j.get<std::vector<double>>();
    } catch (const json::exception&) {
        rec.fail(std::string(what) + " must be an array of numbers");
    }
}

// ---------------------------------------------------------------------------
// Header and record codecs

json header_json(const BundleHeader& h) {
    json videos = json::array();
    for (const VideoInfo& v : h.videos) videos.push_back({{"id", v.id}, {"frames", v.num_frames}});
    return json{{"format", "trace-bundle"},
                {"version", kBundleVersion},
                {"object_classes", h.object_classes},
                {"relation_classes", h.relation_classes},
                {"frame_width", h.frame_width},
                {"frame_height", h.frame_height},
                {"grid_stride", h.grid_stride},
                {"videos", videos}};
}

BundleHeader header_from(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw IngestError(path.filename().string() + ": " + e.what());
    }
    const Record rec(j, path.filename().string());
    if (rec.get<int>("version") != kBundleVersion)
        rec.fail("unsupported bundle version " + std::to_string(rec.get<int>("version")));
    BundleHeader h;
    h.object_classes = rec.get<std::vector<std::string>>("object_classes");
    h.relation_classes = rec.get<std::vector<std::string>>("relation_classes");
    h.frame_width = rec.get<double>("frame_width");
    h.frame_height = rec.get<double>("frame_height");
    h.grid_stride = rec.get<double>("grid_stride");
    for (const json& v : rec.field("videos")) {
        const Record vr(v, rec.locator() + " videos[]");
        h.videos.push_back({vr.get<std::string>("id"), vr.get<long>("frames")});
    }
    return h;
}

json frame_json(const FrameRecord& f) {
    json dets = json::array();
    for (const DetectionRecord& d : f.detections)
        dets.push_back({{"box", box_json(d.box)}, {"scores", d.class_scores}, {"feature", d.feature}});
    json out{{"video", f.video}, {"frame", f.frame}, {"grid", f.grid}, {"clip", f.clip}, {"detections", dets}};
    if (f.labels) out["labels"] = *f.labels;
    return out;
}

FrameRecord frame_from(const Record& rec) {
    FrameRecord f;
    f.video = rec.get<std::string>("video");
    f.frame = rec.get<long>("frame");
    f.grid = rec.get<std::string>("grid");
    f.clip = rec.get<std::string>("clip");
    for (const json& d : rec.field("detections")) {
        const Record dr(d, rec.locator());
        DetectionRecord det;
        det.box = box_from(dr.field("box"), dr, "box");
        det.class_scores = numbers_from(dr.field("scores"), dr, "scores");
        det.feature = dr.get<std::string>("feature");
        f.detections.push_back(std::move(det));
    }
    if (rec.has("labels")) f.labels = rec.get<std::vector<std::size_t>>("labels");
    return f;
}

json frame_gt_json(const FrameGroundTruth& g) {
    return json{{"video", g.video},          {"frame", g.frame},          {"s", g.subj_class}, {"o", g.obj_class},
                {"r", g.rel_class},          {"subj_box", box_json(g.subj_box)}, {"obj_box", box_json(g.obj_box)}};
}

json video_gt_json(const VideoGroundTruth& g) {
    return json{{"video", g.video},
                {"s", g.subj_class},
                {"o", g.obj_class},
                {"r", g.rel_class},
                {"subj", traj_json(g.subj_traj)},
                {"obj", traj_json(g.obj_traj)}};
}

std::string frame_key(const std::string& video, long frame) {
    return "video '" + video + "' frame " + std::to_string(frame);
}

TensorList weights_list(const WeightStore& w) {
    TensorList out;
    for (const auto& [name, t] : w.entries()) out.emplace_back(name, t);
    return out;
}

WeightStore weights_from(const TensorList& list) {
    WeightStore w;
    for (const auto& [name, t] : list) w.insert(name, t);
    return w;
}

void check_manifest(const std::vector<Line>& manifest, const fs::path& path, const WeightStore& w,
                    const std::string& blob) {
    std::set<std::string> listed;
    for (const Line& line : manifest) {
        const Record rec(line.value, locator(path, line.number));
        const auto name = rec.get<std::string>("name");
        const auto shape = rec.get<Shape>("shape");
        if (!w.contains(name)) rec.fail("parameter '" + name + "' absent from " + blob);
        if (w.get(name).shape() != shape)
            rec.fail("parameter '" + name + "' has shape " + shape_string(w.get(name).shape()) + " in " + blob +
                     ", manifest says " + shape_string(shape));
        listed.insert(name);
    }
    for (const auto& [name, t] : w.entries())
        if (!listed.count(name))
            throw IngestError(blob + ": parameter '" + name + "' not listed in " + path.filename().string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor blobs

void write_tensors(const fs::path& path, const TensorList& tensors) {
    std::string out(kMagic, sizeof kMagic);
    put_u16(out, kTensorFormatVersion);
    for (const auto& [name, t] : tensors) {
        if (name.size() > UINT16_MAX) throw PreconditionError("write_tensors: tensor name too long");
        if (t.rank() > UINT8_MAX) throw PreconditionError("write_tensors: rank too large for '" + name + "'");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.rank()));
        for (std::size_t d : t.shape()) {
            if (d > UINT32_MAX) throw PreconditionError("write_tensors: dimension too large for '" + name + "'");
            put_u32(out, static_cast<std::uint32_t>(d));
        }
        for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    write_file(path, out);
}

TensorList read_tensors(const fs::path& path) {
    const std::string file = path.filename().string();
    ByteReader in(read_file(path), file);
    if (in.bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic))
        throw IngestError(file + ": not a tensor blob (bad magic)");
    const std::uint16_t version = in.u16("version");
    if (version != kTensorFormatVersion) throw IngestError(file + ": unsupported version " + std::to_string(version));
    TensorList out;
    std::set<std::string> seen;
    while (!in.done()) {
        const std::uint16_t len = in.u16("name length");
        std::string name = in.bytes(len, "tensor name");
        const std::string what = "tensor '" + name + "'";
        if (!seen.insert(name).second) throw IngestError(file + ": duplicate " + what);
        Shape shape(in.u8(what + " rank"));
        for (std::size_t& d : shape) d = in.u32(what + " dims");
        std::vector<double> data(shape_size(shape));
        for (double& v : data) v = std::bit_cast<float>(in.u32(what + " payload"));
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundle

void validate_bundle(const DatasetBundle& b) {
    const BundleHeader& h = b.header;
    const std::size_t O = h.object_classes.size();
    const std::size_t R = h.relation_classes.size();
    const std::string hf = kHeaderFile;
    if (!(h.frame_width > 0.0) || !(h.frame_height > 0.0) || !(h.grid_stride > 0.0))
        throw IngestError(hf + ": frame size and grid stride must be positive");
    std::map<std::string, long> videos;
    for (const VideoInfo& v : h.videos) {
        if (v.num_frames < 0) throw IngestError(hf + ": video '" + v.id + "' has a negative frame count");
        if (!videos.emplace(v.id, v.num_frames).second) throw IngestError(hf + ": duplicate video '" + v.id + "'");
    }
    auto check_frame = [&](const std::string& file, const std::string& video, long frame) {
        const auto it = videos.find(video);
        if (it == videos.end()) throw IngestError(file + ": " + frame_key(video, frame) + ": undeclared video");
        if (frame < 0 || frame >= it->second)
            throw IngestError(file + ": " + frame_key(video, frame) + ": frame outside the video");
    };
    auto check_classes = [&](const std::string& file, const std::string& where, std::size_t s, std::size_t o,
                             std::size_t r) {
        if (s >= O || o >= O || r >= R) throw IngestError(file + ": " + where + ": class id out of range");
    };
    auto tensor = [&](const std::string& file, const std::string& where, const std::string& id,
                      std::size_t rank) -> const Tensor& {
        const auto it = b.features.find(id);
        if (it == b.features.end())
            throw IngestError(file + ": " + where + ": references missing feature '" + id + "'");
        if (it->second.rank() != rank)
            throw IngestError(file + ": " + where + ": feature '" + id + "' must have rank " + std::to_string(rank));
        return it->second;
    };

    std::map<std::pair<std::string, long>, std::size_t> det_counts;
    std::optional<Shape> grid_shape, clip_shape;
    std::optional<std::size_t> feature_width;
    const std::string ff = kFramesFile;
    for (const FrameRecord& f : b.frames) {
        const std::string key = frame_key(f.video, f.frame);
        check_frame(ff, f.video, f.frame);
        if (!det_counts.emplace(std::make_pair(f.video, f.frame), f.detections.size()).second)
            throw IngestError(ff + ": " + key + ": duplicate frame record");
        const Shape& gs = tensor(ff, key, f.grid, 3).shape();
        const Shape& cs = tensor(ff, key, f.clip, 3).shape();
        if (!grid_shape) grid_shape = gs;
        if (!clip_shape) clip_shape = cs;
        if (gs != *grid_shape || cs != *clip_shape)
            throw IngestError(ff + ": " + key + ": feature maps differ in shape from earlier frames");
        for (std::size_t i = 0; i < f.detections.size(); ++i) {
            const DetectionRecord& d = f.detections[i];
            const std::string where = key + " detection " + std::to_string(i);
            if (!d.box.valid()) throw IngestError(ff + ": " + where + ": box has x2 < x1 or y2 < y1");
            if (d.class_scores.size() != O)
                throw IngestError(ff + ": " + where + ": " + std::to_string(d.class_scores.size()) +
                                  " class scores, header declares " + std::to_string(O));
            const std::size_t width = tensor(ff, where, d.feature, 1).size();
            if (!feature_width) feature_width = width;
            if (width != *feature_width)
                throw IngestError(ff + ": " + where + ": feature width differs from earlier detections");
        }
        if (f.labels) {
            if (f.labels->size() != f.detections.size())
                throw IngestError(ff + ": " + key + ": one label per detection required");
            for (std::size_t label : *f.labels)
                if (label >= O) throw IngestError(ff + ": " + key + ": label out of range");
        }
    }
    if (!std::is_sorted(b.frames.begin(), b.frames.end(), [](const FrameRecord& x, const FrameRecord& y) {
            return std::tie(x.video, x.frame) < std::tie(y.video, y.frame);
        }))
        throw IngestError(ff + ": records must be ordered by (video, frame)");

    const std::string pf = kPairsFile;
    for (const auto& [k, pairs] : b.pairs) {
        const auto it = det_counts.find(k);
        if (it == det_counts.end()) throw IngestError(pf + ": " + frame_key(k.first, k.second) + ": no frame record");
        for (const auto& [i, j] : pairs)
            if (i >= it->second || j >= it->second || i == j)
                throw IngestError(pf + ": " + frame_key(k.first, k.second) + ": invalid pair (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
    }

    if (b.embedding.matrix.rank() != 2 || b.embedding.classes() != O)
        throw IngestError(std::string(kEmbeddingFile) + ": table must have one row per object class");
    if (b.frequency.object_classes() != O || b.frequency.relation_classes() != R)
        throw IngestError(std::string(kFrequencyFile) + ": class counts disagree with the header");
    if (b.oracle_weights) {
        for (const auto& [name, t] : b.weights.entries())
            if (!b.oracle_weights->contains(name) || b.oracle_weights->get(name).shape() != t.shape())
                throw IngestError(std::string(kOracleWeightsFile) + ": parameter '" + name +
                                  "' missing or shaped differently from " + kWeightsFile);
        if (b.oracle_weights->size() != b.weights.size())
            throw IngestError(std::string(kOracleWeightsFile) + ": parameter set differs from " + kWeightsFile);
    }

    const std::string tf = kTracksFile;
    std::set<std::tuple<std::string, std::size_t, TrajectoryId>> track_keys;
    std::map<std::pair<std::string, std::size_t>, Segment> segments;
    for (const TrackRecord& t : b.tracks) {
        const std::string where = "video '" + t.video + "' segment " + std::to_string(t.segment.id) + " traj " +
                                  std::to_string(t.traj);
        if (!videos.count(t.video)) throw IngestError(tf + ": " + where + ": undeclared video");
        if (!track_keys.insert({t.video, t.segment.id, t.traj}).second)
            throw IngestError(tf + ": " + where + ": duplicate trajectory");
        const auto [it, fresh] = segments.emplace(std::make_pair(t.video, t.segment.id), t.segment);
        if (!fresh && (it->second.begin != t.segment.begin || it->second.end != t.segment.end))
            throw IngestError(tf + ": " + where + ": segment bounds disagree with earlier records");
        if (t.segment.begin >= t.segment.end) throw IngestError(tf + ": " + where + ": empty segment");
        if (t.boxes.boxes.empty() || t.boxes.start_frame < t.segment.begin || t.boxes.end_frame() > t.segment.end)
            throw IngestError(tf + ": " + where + ": trajectory must be non-empty and inside its segment");
    }
    const std::string mf = kTrackMapFile;
    std::set<std::tuple<std::string, std::size_t, long, std::size_t>> mapped;
    for (const TrackMapRecord& m : b.track_map) {
        const std::string where = frame_key(m.video, m.frame) + " detection " + std::to_string(m.det);
        if (!track_keys.count({m.video, m.segment, m.traj}))
            throw IngestError(mf + ": " + where + ": references missing trajectory " + std::to_string(m.traj) +
                              " in segment " + std::to_string(m.segment));
        const auto it = det_counts.find({m.video, m.frame});
        if (it == det_counts.end() || m.det >= it->second)
            throw IngestError(mf + ": " + where + ": references a missing detection");
        const Segment& s = segments.at({m.video, m.segment});
        if (m.frame < s.begin || m.frame >= s.end) throw IngestError(mf + ": " + where + ": frame outside the segment");
        if (!mapped.insert({m.video, m.segment, m.frame, m.det}).second)
            throw IngestError(mf + ": " + where + ": detection mapped twice in one segment");
    }

    const std::string gf = kFrameGtFile;
    for (const FrameGroundTruth& g : b.frame_gt) {
        check_frame(gf, g.video, g.frame);
        check_classes(gf, frame_key(g.video, g.frame), g.subj_class, g.obj_class, g.rel_class);
    }
    const std::string vf = kVideoGtFile;
    for (const VideoGroundTruth& g : b.video_gt) {
        if (!videos.count(g.video)) throw IngestError(vf + ": video '" + g.video + "': undeclared video");
        check_classes(vf, "video '" + g.video + "'", g.subj_class, g.obj_class, g.rel_class);
    }
}

void save_bundle(const DatasetBundle& b, const fs::path& dir) {
    validate_bundle(b);
    fs::create_directories(dir);
    write_file(dir / kHeaderFile, header_json(b.header).dump(2) + "\n");

    std::vector<json> frames;
    for (const FrameRecord& f : b.frames) frames.push_back(frame_json(f));
    write_jsonl(dir / kFramesFile, frames);

    std::vector<json> pairs;
    for (const auto& [k, list] : b.pairs) {
        json arr = json::array();
        for (const auto& [i, j] : list) arr.push_back({i, j});
        pairs.push_back({{"video", k.first}, {"frame", k.second}, {"pairs", arr}});
    }
    write_jsonl(dir / kPairsFile, pairs);

    TensorList features(b.features.begin(), b.features.end());
    write_tensors(dir / kFeaturesFile, features);
    write_tensors(dir / kWeightsFile, weights_list(b.weights));
    if (b.oracle_weights) write_tensors(dir / kOracleWeightsFile, weights_list(*b.oracle_weights));
    std::vector<json> manifest;
    for (const auto& [name, t] : b.weights.entries()) manifest.push_back({{"name", name}, {"shape", t.shape()}});
    write_jsonl(dir / kManifestFile, manifest);
    write_tensors(dir / kEmbeddingFile, {{kEmbeddingTensor, b.embedding.matrix}});

    std::vector<json> freq;
    const FrequencyTable& ft = b.frequency;
    for (std::size_t s = 0; s < ft.object_classes(); ++s)
        for (std::size_t o = 0; o < ft.object_classes(); ++o)
            for (std::size_t r = 0; r < ft.relation_classes(); ++r)
                if (const std::uint64_t n = ft.count(s, o, r))
                    freq.push_back({{"s", s}, {"o", o}, {"r", r}, {"count", n}});
    write_jsonl(dir / kFrequencyFile, freq);

    std::vector<json> tracks;
    for (const TrackRecord& t : b.tracks)
        tracks.push_back({{"video", t.video},
                          {"segment", t.segment.id},
                          {"begin", t.segment.begin},
                          {"end", t.segment.end},
                          {"traj", t.traj},
                          {"start_frame", t.boxes.start_frame},
                          {"boxes", traj_json(t.boxes)["boxes"]}});
    write_jsonl(dir / kTracksFile, tracks);

    std::vector<json> map;
    for (const TrackMapRecord& m : b.track_map)
        map.push_back(
            {{"video", m.video}, {"segment", m.segment}, {"frame", m.frame}, {"det", m.det}, {"traj", m.traj}});
    write_jsonl(dir / kTrackMapFile, map);

    std::vector<json> fgt;
    for (const FrameGroundTruth& g : b.frame_gt) fgt.push_back(frame_gt_json(g));
    write_jsonl(dir / kFrameGtFile, fgt);
    std::vector<json> vgt;
    for (const VideoGroundTruth& g : b.video_gt) vgt.push_back(video_gt_json(g));
    write_jsonl(dir / kVideoGtFile, vgt);
}

std::vector<fs::path> bundle_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const char* name : {kHeaderFile, kFramesFile, kPairsFile, kFeaturesFile, kWeightsFile, kOracleWeightsFile,
                             kManifestFile, kEmbeddingFile, kFrequencyFile, kTracksFile, kTrackMapFile, kFrameGtFile,
                             kVideoGtFile})
        if (fs::exists(dir / name)) out.push_back(dir / name);
    return out;
}

DatasetBundle load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IngestError(dir.string() + ": bundle directory not found");
    for (const char* name :
         {kHeaderFile, kFramesFile, kFeaturesFile, kWeightsFile, kManifestFile, kEmbeddingFile, kFrequencyFile})
        if (!fs::exists(dir / name)) throw IngestError(dir.string() + ": missing required file " + name);
    auto optional_lines = [&](const char* name) {
        return fs::exists(dir / name) ? read_jsonl(dir / name) : std::vector<Line>{};
    };

    DatasetBundle b;
    b.header = header_from(dir / kHeaderFile);
    const std::size_t O = b.header.object_classes.size();
    const std::size_t R = b.header.relation_classes.size();

    for (const Line& line : read_jsonl(dir / kFramesFile))
        b.frames.push_back(frame_from(Record(line.value, locator(kFramesFile, line.number))));

    for (const Line& line : optional_lines(kPairsFile)) {
        const Record rec(line.value, locator(kPairsFile, line.number));
        std::vector<IndexPair> list;
        try {
            for (const json& p : rec.field("pairs")) list.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
        } catch (const json::exception&) {
            rec.fail("pairs must be [[subject, object], ...]");
        }
        const auto key = std::make_pair(rec.get<std::string>("video"), rec.get<long>("frame"));
        if (!b.pairs.emplace(key, std::move(list)).second) rec.fail("duplicate pairs record");
    }

    for (auto& [name, t] : read_tensors(dir / kFeaturesFile)) b.features.emplace(name, std::move(t));
    b.weights = weights_from(read_tensors(dir / kWeightsFile));
    check_manifest(read_jsonl(dir / kManifestFile), dir / kManifestFile, b.weights, kWeightsFile);
    if (fs::exists(dir / kOracleWeightsFile)) b.oracle_weights = weights_from(read_tensors(dir / kOracleWeightsFile));

    const TensorList emb = read_tensors(dir / kEmbeddingFile);
    if (emb.size() != 1 || emb.front().first != kEmbeddingTensor)
        throw IngestError(std::string(kEmbeddingFile) + ": expected a single tensor named '" + kEmbeddingTensor + "'");
    b.embedding.matrix = emb.front().second;

    b.frequency = FrequencyTable(O, R);
    for (const Line& line : read_jsonl(dir / kFrequencyFile)) {
        const Record rec(line.value, locator(kFrequencyFile, line.number));
        const auto s = rec.get<std::size_t>("s");
        const auto o = rec.get<std::size_t>("o");
        const auto r = rec.get<std::size_t>("r");
        if (s >= O || o >= O || r >= R) rec.fail("class id out of range");
        b.frequency.add(s, o, r, rec.get<std::uint64_t>("count"));
    }

    for (const Line& line : optional_lines(kTracksFile)) {
        const Record rec(line.value, locator(kTracksFile, line.number));
        TrackRecord t;
        t.video = rec.get<std::string>("video");
        t.segment = {rec.get<std::size_t>("segment"), rec.get<long>("begin"), rec.get<long>("end")};
        t.traj = rec.get<TrajectoryId>("traj");
        t.boxes = traj_from(json{{"start_frame", rec.field("start_frame")}, {"boxes", rec.field("boxes")}}, rec,
                            "trajectory");
        b.tracks.push_back(std::move(t));
    }
    for (const Line& line : optional_lines(kTrackMapFile)) {
        const Record rec(line.value, locator(kTrackMapFile, line.number));
        b.track_map.push_back({rec.get<std::string>("video"), rec.get<std::size_t>("segment"), rec.get<long>("frame"),
                               rec.get<std::size_t>("det"), rec.get<TrajectoryId>("traj")});
    }
    for (const Line& line : optional_lines(kFrameGtFile)) {
        const Record rec(line.value, locator(kFrameGtFile, line.number));
        b.frame_gt.push_back({rec.get<std::string>("video"), rec.get<long>("frame"), rec.get<std::size_t>("s"),
                              rec.get<std::size_t>("o"), rec.get<std::size_t>("r"),
                              box_from(rec.field("subj_box"), rec, "subj_box"),
                              box_from(rec.field("obj_box"), rec, "obj_box")});
    }
    for (const Line& line : optional_lines(kVideoGtFile)) {
        const Record rec(line.value, locator(kVideoGtFile, line.number));
        b.video_gt.push_back({rec.get<std::string>("video"), rec.get<std::size_t>("s"), rec.get<std::size_t>("o"),
                              rec.get<std::size_t>("r"), traj_from(rec.field("subj"), rec, "subj"),
                              traj_from(rec.field("obj"), rec, "obj")});
    }
    validate_bundle(b);
    return b;
}

Model make_model(const DatasetBundle& bundle, bool oracle) {
    if (oracle && !bundle.oracle_weights)
        throw ConfigError(std::string("bundle has no ") + kOracleWeightsFile + " for oracle mode");
    return Model{oracle ? *bundle.oracle_weights : bundle.weights, bundle.embedding, bundle.frequency};
}

FrameInput frame_input(const DatasetBundle& bundle, std::size_t index, const Config& config) {
    const FrameRecord& rec = bundle.frames.at(index);
    FrameInput in;
    in.video = rec.video;
    in.frame = rec.frame;
    in.frame_width = bundle.header.frame_width;
    in.frame_height = bundle.header.frame_height;
    for (const DetectionRecord& d : rec.detections) {
        in.detections.push_back({d.box, d.class_scores, d.feature});
        in.detection_features.push_back(bundle.features.at(d.feature).values());
    }
    in.labels = rec.labels;
    if (const auto it = bundle.pairs.find({rec.video, rec.frame}); it != bundle.pairs.end()) in.pairs = it->second;
    in.grid = {bundle.features.at(rec.grid), bundle.header.grid_stride};

    if (config.temporal_mode == TemporalMode::None) return in;
    long num_frames = 0;
    for (const VideoInfo& v : bundle.header.videos)
        if (v.id == rec.video) num_frames = v.num_frames;
    const Tensor& own_clip = bundle.features.at(rec.clip);
    Shape shape{config.temporal_window};
    shape.insert(shape.end(), own_clip.shape().begin(), own_clip.shape().end());
    std::vector<double> data;
    data.reserve(shape_size(shape));
    const long half = static_cast<long>(config.temporal_window / 2);
    const long stride = static_cast<long>(config.temporal_stride);
    for (long k = 0; k < static_cast<long>(config.temporal_window); ++k) {
        const long f = std::clamp(rec.frame + stride * (k - half), 0L, std::max(num_frames - 1, 0L));
        const auto it = std::lower_bound(bundle.frames.begin(), bundle.frames.end(), std::make_pair(rec.video, f),
                                         [](const FrameRecord& r, const std::pair<std::string, long>& key) {
                                             return std::tie(r.video, r.frame) < std::tie(key.first, key.second);
                                         });
        if (it == bundle.frames.end() || it->video != rec.video || it->frame != f)
            throw IngestError(std::string(kFramesFile) + ": " + frame_key(rec.video, rec.frame) +
                              ": temporal window needs missing frame " + std::to_string(f));
        const auto& clip = bundle.features.at(it->clip).values();
        data.insert(data.end(), clip.begin(), clip.end());
    }
    in.volume = {Tensor(std::move(shape), std::move(data)), bundle.header.grid_stride};
    return in;
}

std::vector<SegmentTracks> segment_tracks(const DatasetBundle& bundle, const std::string& video) {
    std::map<std::size_t, SegmentTracks> by_segment;
    for (const TrackRecord& t : bundle.tracks) {
        if (t.video != video) continue;
        SegmentTracks& s = by_segment[t.segment.id];
        s.segment = t.segment;
        s.trajectories.emplace(t.traj, t.boxes);
    }
    for (const TrackMapRecord& m : bundle.track_map) {
        if (m.video != video) continue;
        by_segment.at(m.segment).detection_to_trajectory[{m.frame, m.det}] = m.traj;
    }
    std::vector<SegmentTracks> out;
    for (auto& [id, s] : by_segment) out.push_back(std::move(s));
    return out;
}

// ---------------------------------------------------------------------------
// Outputs

void write_scene_graphs(const fs::path& path, const std::vector<SceneGraph>& graphs) {
    std::vector<json> records;
    for (const SceneGraph& g : graphs) {
        json dets = json::array();
        for (std::size_t i = 0; i < g.detections.size(); ++i) {
            const Detection& d = g.detections[i];
            dets.push_back({{"box", box_json(d.box)},
                            {"scores", d.class_scores},
                            {"feature", d.feature_ref},
                            {"class", g.classes.at(i)},
                            {"source", g.source_indices.at(i)}});
        }
        json triplets = json::array();
        for (const TripletPrediction& t : g.triplets)
            triplets.push_back({{"subj", t.subj_idx},
                                {"obj", t.obj_idx},
                                {"s", t.subj_class},
                                {"o", t.obj_class},
                                {"r", t.rel_class},
                                {"score", t.score}});
        records.push_back({{"video", g.video}, {"frame", g.frame}, {"detections", dets}, {"triplets", triplets}});
    }
    write_jsonl(path, records);
}

std::vector<SceneGraph> read_scene_graphs(const fs::path& path) {
    std::vector<SceneGraph> out;
    for (const Line& line : read_jsonl(path)) {
        const Record rec(line.value, locator(path, line.number));
        SceneGraph g;
        g.video = rec.get<std::string>("video");
        g.frame = rec.get<long>("frame");
        for (const json& d : rec.field("detections")) {
            const Record dr(d, rec.locator());
            g.detections.push_back({box_from(dr.field("box"), dr, "box"), numbers_from(dr.field("scores"), dr, "scores"),
                                    dr.get<std::string>("feature")});
            g.classes.push_back(dr.get<std::size_t>("class"));
            g.source_indices.push_back(dr.get<std::size_t>("source"));
        }
        for (const json& t : rec.field("triplets")) {
            const Record tr(t, rec.locator());
            TripletPrediction p{tr.get<std::size_t>("subj"), tr.get<std::size_t>("obj"), tr.get<std::size_t>("s"),
                                tr.get<std::size_t>("o"),    tr.get<std::size_t>("r"),   tr.get<double>("score")};
            if (p.subj_idx >= g.detections.size() || p.obj_idx >= g.detections.size())
                tr.fail("triplet references a missing detection");
            g.triplets.push_back(p);
        }
        out.push_back(std::move(g));
    }
    return out;
}

void write_video_relations(const fs::path& path, const VideoRelationList& relations) {
    std::vector<json> records;
    for (const auto& [video, r] : relations) {
        json members = json::array();
        for (const auto& [seg, idx] : r.members) members.push_back({seg, idx});
        records.push_back({{"video", video},
                           {"s", r.subj_class},
                           {"o", r.obj_class},
                           {"r", r.rel_class},
                           {"score", r.score},
                           {"subj", traj_json(r.subj_traj)},
                           {"obj", traj_json(r.obj_traj)},
                           {"members", members}});
    }
    write_jsonl(path, records);
}

VideoRelationList read_video_relations(const fs::path& path) {
    VideoRelationList out;
    for (const Line& line : read_jsonl(path)) {
        const Record rec(line.value, locator(path, line.number));
        VideoRelation r;
        r.subj_class = rec.get<std::size_t>("s");
        r.obj_class = rec.get<std::size_t>("o");
        r.rel_class = rec.get<std::size_t>("r");
        r.score = rec.get<double>("score");
        r.subj_traj = traj_from(rec.field("subj"), rec, "subj");
        r.obj_traj = traj_from(rec.field("obj"), rec, "obj");
        r.members = rec.get<std::vector<std::pair<std::size_t, std::size_t>>>("members");
        out.emplace_back(rec.get<std::string>("video"), std::move(r));
    }
    return out;
}

void write_report(const fs::path& path, const MetricReport& report) {
    std::map<std::string, double> flat = report.values;
    for (const auto& [metric, classes] : report.per_class)
        for (const auto& [cls, v] : classes) flat[metric + "[" + std::to_string(cls) + "]"] = v;
    std::string data = "metric\tpercent\n";
    for (const auto& [k, v] : flat) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", v * 100.0);
        data += k + "\t" + buf + "\n";
    }
    write_file(path, data);
}

std::map<std::string, double> read_report(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::map<std::string, double> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        if (++number == 1) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw IngestError(locator(path, number) + ": expected key<TAB>value");
        try {
            out[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw IngestError(locator(path, number) + ": value is not a number");
        }
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    constexpr std::uint64_t kPrime = 1099511628211ULL;
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kPrime;
    }
    return h;
}

std::uint64_t content_hash(const std::vector<fs::path>& files) {
    std::uint64_t h = kFnvOffset;
    for (const fs::path& f : files) {
        h = fnv1a(f.filename().string(), h);
        h = fnv1a(std::string_view("\0", 1), h);
        h = fnv1a(read_file(f), h);
    }
    return h;
}

std::string hex_hash(std::uint64_t hash) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace trace::io
