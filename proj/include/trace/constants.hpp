#pragma once

// Protocol constants for inference, linking and evaluation. Every default used
// elsewhere in the library is read from this table; call sites never spell the
// numbers out (tests/test_constants.cpp scans the sources for stray literals).

#include <array>
#include <cstddef>
#include <string_view>

namespace trace {

template <typename T>
struct Cited {
    T value;
    std::string_view source;
};

struct ProtocolConstants {
    // Clip sampling around the center frame.
    Cited<std::size_t> temporal_window{8, "clip: neighboring frames around the center frame"};
    Cited<std::size_t> temporal_stride{4, "clip: temporal stride between sampled frames"};

    // Detection post-processing.
    Cited<std::size_t> top_proposals{100, "testing: proposals kept per frame after detection"};
    Cited<double> nms_iou{0.5, "testing: per-class NMS IoU threshold"};

    // Matching thresholds.
    Cited<double> hit_iou{0.5, "evaluation: box IoU for a predicted box to count as a hit"};
    Cited<double> viou{0.5, "linking/evaluation: trajectory vIoU threshold"};

    // Temporal linking.
    Cited<std::size_t> segment_length{30, "linking: frames per segment"};
    Cited<std::size_t> segment_interval{15, "linking: frames between segment starts"};
    Cited<std::size_t> linking_sample_stride{4, "linking: a quarter of each segment's frames are sampled"};

    // Per-pair prediction caps.
    Cited<std::array<std::size_t, 2>> k_per_pair_frame_level{{6, 7}, "frame-level evaluation: predictions per object pair"};
    Cited<std::size_t> k_per_pair_video_level{20, "video-level evaluation: predicted relations kept per pair"};
    Cited<std::size_t> frame_triplet_limit{50, "frame-level evaluation: triplets per frame"};

    // Context aggregation.
    Cited<std::array<std::size_t, 2>> group_options{{2, 4}, "spatial propagation: group counts studied"};
    Cited<std::size_t> default_groups{4, "spatial propagation: default group count"};
    Cited<std::size_t> default_heads{8, "temporal attention: head count"};

    // Metric cut-offs.
    Cited<std::array<std::size_t, 4>> recall_ks{{10, 20, 50, 100}, "frame-level Recall@K cut-offs"};
    Cited<std::array<std::size_t, 2>> video_recall_ks{{50, 100}, "video-level relation detection recall cut-offs"};
    Cited<std::array<std::size_t, 3>> tagging_ks{{1, 5, 10}, "relation tagging precision cut-offs"};

    // Prior branch smoothing and visual-branch reduced dimension defaults.
    Cited<double> prior_alpha{1.0, "statistical prior: Laplace smoothing"};
    Cited<std::size_t> reduced_dim{256, "visual branch: reduced channel dimension"};
};

const ProtocolConstants& constants() noexcept;

}  // namespace trace
