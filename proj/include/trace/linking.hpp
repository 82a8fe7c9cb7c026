#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "trace/config.hpp"
#include "trace/geometry.hpp"
#include "trace/pipeline.hpp"

namespace trace {

using TrajectoryId = std::size_t;

// Frames [begin, end) of one video segment.
struct Segment {
    std::size_t id = 0;
    long begin = 0;
    long end = 0;

    long length() const noexcept { return end - begin; }

    friend bool operator==(const Segment&, const Segment&) = default;
};

// Overlapping segments of `seg_len` frames starting every `interval` frames;
// the last one is clipped to the video.
std::vector<Segment> plan_segments(long num_frames, std::size_t seg_len, std::size_t interval);

// First frame of the segment, then every `stride`-th frame.
std::vector<long> sampled_frames(const Segment& segment, std::size_t stride);

// Tracker output for one segment.
struct SegmentTracks {
    Segment segment;
    std::map<TrajectoryId, Trajectory> trajectories;
    // (frame, input detection index) -> trajectory.
    std::map<std::pair<long, std::size_t>, TrajectoryId> detection_to_trajectory;
};

struct SegmentTriplet {
    std::size_t segment = 0;
    TrajectoryId subj_id = 0;
    TrajectoryId obj_id = 0;
    Trajectory subj_traj;
    Trajectory obj_traj;
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    double score = 0.0;
    std::size_t support = 1;

    friend bool operator==(const SegmentTriplet&, const SegmentTriplet&) = default;
};

struct MergeResult {
    std::vector<SegmentTriplet> triplets;  // ordered by (subj_id, obj_id, subj, obj, rel)
    std::size_t dropped = 0;               // triplets whose detections had no trajectory
};

// Groups the sampled frames' triplets by trajectories and categories; a group
// seen in several frames counts once with the summed score.
MergeResult merge_segment_triplets(std::span<const SceneGraph> frame_graphs, const SegmentTracks& tracks,
                                   std::size_t sample_stride);

struct VideoRelation {
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    Trajectory subj_traj;
    Trajectory obj_traj;
    double score = 0.0;
    // Chain members as (segment position, index within that segment's list).
    std::vector<std::pair<std::size_t, std::size_t>> members;

    friend bool operator==(const VideoRelation&, const VideoRelation&) = default;
};

// Appends `later` to `earlier`, keeping earlier boxes where both cover a frame
// and interpolating across a gap.
Trajectory concatenate(const Trajectory& earlier, const Trajectory& later);

// Total order used for greedy precedence: score descending, then segment,
// then trajectory and class ids.
bool segment_triplet_before(const SegmentTriplet& a, const SegmentTriplet& b) noexcept;

// Greedy association across temporally adjacent segments. `segments[k]` are
// the triplets of `bounds[k]`; bounds are in time order.
std::vector<VideoRelation> associate_segments(std::span<const std::vector<SegmentTriplet>> segments,
                                              std::span<const Segment> bounds, double viou_threshold,
                                              ScoreMode score_mode);

struct LinkResult {
    std::vector<VideoRelation> relations;
    std::size_t dropped = 0;
};

// Merge + associate for one video's frame graphs.
LinkResult link_video(std::span<const SceneGraph> frame_graphs, std::span<const SegmentTracks> tracks,
                      const Config& config);

}  // namespace trace
