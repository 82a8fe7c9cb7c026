#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trace/config.hpp"
#include "trace/linking.hpp"
#include "trace/metrics.hpp"
#include "trace/pipeline.hpp"
#include "trace/tensor.hpp"

namespace trace::io {

namespace fs = std::filesystem;

inline constexpr std::uint16_t kTensorFormatVersion = 1;
inline constexpr int kBundleVersion = 1;
inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

// Named tensors in file order.
using TensorList = std::vector<std::pair<std::string, Tensor>>;

// Binary blob: "TRCE", u16 version, then per tensor u16 name length, name,
// u8 rank, u32 dims, f32 payload; all little-endian. Values are narrowed to
// float on write.
void write_tensors(const fs::path& path, const TensorList& tensors);
TensorList read_tensors(const fs::path& path);

struct VideoInfo {
    std::string id;
    long num_frames = 0;

    friend bool operator==(const VideoInfo&, const VideoInfo&) = default;
};

struct BundleHeader {
    std::vector<std::string> object_classes;
    std::vector<std::string> relation_classes;
    double frame_width = 1.0;
    double frame_height = 1.0;
    double grid_stride = 1.0;
    std::vector<VideoInfo> videos;

    friend bool operator==(const BundleHeader&, const BundleHeader&) = default;
};

struct DetectionRecord {
    BoundingBox box;
    std::vector<double> class_scores;
    std::string feature;  // tensor id of the [Fd] appearance vector

    friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct FrameRecord {
    std::string video;
    long frame = 0;
    std::vector<DetectionRecord> detections;
    std::optional<std::vector<std::size_t>> labels;
    std::string grid;  // tensor id, [C x H x W] 2-D feature map
    std::string clip;  // tensor id, [C' x H x W] 3-D feature map of this frame

    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct TrackRecord {
    std::string video;
    Segment segment;
    TrajectoryId traj = 0;
    Trajectory boxes;

    friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

struct TrackMapRecord {
    std::string video;
    std::size_t segment = 0;
    long frame = 0;
    std::size_t det = 0;
    TrajectoryId traj = 0;

    friend bool operator==(const TrackMapRecord&, const TrackMapRecord&) = default;
};

// In-memory form of a bundle directory. Every cross-reference is checked by
// validate_bundle().
struct DatasetBundle {
    BundleHeader header;
    std::vector<FrameRecord> frames;                                    // ordered by (video, frame)
    std::map<std::pair<std::string, long>, std::vector<IndexPair>> pairs;  // ground-truth candidate pairs
    std::map<std::string, Tensor> features;
    WeightStore weights;
    std::optional<WeightStore> oracle_weights;
    EmbeddingTable embedding;
    FrequencyTable frequency;
    std::vector<TrackRecord> tracks;
    std::vector<TrackMapRecord> track_map;
    std::vector<FrameGroundTruth> frame_gt;
    std::vector<VideoGroundTruth> video_gt;

    friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// Throws IngestError naming the file and record of the first problem.
void validate_bundle(const DatasetBundle& bundle);

void save_bundle(const DatasetBundle& bundle, const fs::path& dir);
DatasetBundle load_bundle(const fs::path& dir);

// Files read by load_bundle(), in a fixed order; absent optional files skipped.
std::vector<fs::path> bundle_files(const fs::path& dir);

Model make_model(const DatasetBundle& bundle, bool oracle);

// Frame input for frames[index]; the volume stacks the clip maps of
// T frames spaced `temporal_stride` apart, centred on the frame and clamped
// to the video.
FrameInput frame_input(const DatasetBundle& bundle, std::size_t index, const Config& config);

std::vector<SegmentTracks> segment_tracks(const DatasetBundle& bundle, const std::string& video);

void write_scene_graphs(const fs::path& path, const std::vector<SceneGraph>& graphs);
std::vector<SceneGraph> read_scene_graphs(const fs::path& path);

using VideoRelationList = std::vector<std::pair<std::string, VideoRelation>>;
void write_video_relations(const fs::path& path, const VideoRelationList& relations);
VideoRelationList read_video_relations(const fs::path& path);

// Header "metric<TAB>percent", then one "key<TAB>percentage" line per metric
// sorted by key; per-class entries appear as "metric[class]".
void write_report(const fs::path& path, const MetricReport& report);
std::map<std::string, double> read_report(const fs::path& path);

// FNV-1a 64 over each file's name and bytes, in the given order.
std::uint64_t content_hash(const std::vector<fs::path>& files);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = kFnvOffset);
std::string hex_hash(std::uint64_t hash);

}  // namespace trace::io
