#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trace {

// Axis-aligned box in continuous corner coordinates. Area has no +1 pixel term.
struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const noexcept { return x2 > x1 ? x2 - x1 : 0.0; }
    double height() const noexcept { return y2 > y1 ? y2 - y1 : 0.0; }
    double area() const noexcept { return width() * height(); }
    double center_x() const noexcept { return (x1 + x2) / 2.0; }
    double center_y() const noexcept { return (y1 + y2) / 2.0; }
    bool valid() const noexcept { return x1 <= x2 && y1 <= y2; }
    bool contains(const BoundingBox& other) const noexcept {
        return x1 <= other.x1 && y1 <= other.y1 && x2 >= other.x2 && y2 >= other.y2;
    }
    BoundingBox scaled(double factor) const noexcept {
        return {x1 * factor, y1 * factor, x2 * factor, y2 * factor};
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept;
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;
BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) noexcept;

// Box sequence over the contiguous frames [start_frame, start_frame + size()).
struct Trajectory {
    long start_frame = 0;
    std::vector<BoundingBox> boxes;

    long end_frame() const noexcept { return start_frame + static_cast<long>(boxes.size()); }  // exclusive
    bool covers(long frame) const noexcept { return frame >= start_frame && frame < end_frame(); }
    // Box at `frame`, or an empty box outside the extent.
    BoundingBox at(long frame) const noexcept;
    // Sub-trajectory restricted to [begin, end); may be empty.
    Trajectory clipped(long begin, long end) const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Volumetric IoU over the union of both temporal extents.
double viou(const Trajectory& a, const Trajectory& b) noexcept;

struct Detection {
    BoundingBox box;
    std::vector<double> class_scores;
    std::string feature_ref;

    std::size_t argmax_class() const noexcept;
    double max_score() const noexcept;

    friend bool operator==(const Detection&, const Detection&) = default;
};

// Indices of the detections kept by per-class greedy NMS, ordered by
// descending max score (ties by ascending input index), at most `max_kept`.
std::vector<std::size_t> per_class_nms_indices(std::span<const Detection> dets,
                                               double iou_threshold, std::size_t max_kept);

std::vector<Detection> per_class_nms(std::span<const Detection> dets, double iou_threshold,
                                     std::size_t max_kept);

}  // namespace trace
