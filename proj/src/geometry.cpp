#include "trace/geometry.hpp"

#include <algorithm>
#include <numeric>

#include "trace/errors.hpp"

namespace trace {

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) noexcept {
    return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

BoundingBox Trajectory::at(long frame) const noexcept {
    if (!covers(frame)) return {};
    return boxes[static_cast<std::size_t>(frame - start_frame)];
}

Trajectory Trajectory::clipped(long begin, long end) const {
    Trajectory out;
    const long lo = std::max(begin, start_frame);
    const long hi = std::min(end, end_frame());
    out.start_frame = lo;
    for (long f = lo; f < hi; ++f) out.boxes.push_back(at(f));
    return out;
}

double viou(const Trajectory& a, const Trajectory& b) noexcept {
    if (a.boxes.empty() && b.boxes.empty()) return 0.0;
    long lo = a.start_frame;
    long hi = a.end_frame();
    if (a.boxes.empty()) {
        lo = b.start_frame;
        hi = b.end_frame();
    } else if (!b.boxes.empty()) {
        lo = std::min(lo, b.start_frame);
        hi = std::max(hi, b.end_frame());
    }
    double inter = 0.0;
    double uni = 0.0;
    for (long f = lo; f < hi; ++f) {
        const BoundingBox ba = a.at(f);
        const BoundingBox bb = b.at(f);
        const double i = intersection_area(ba, bb);
        inter += i;
        uni += ba.area() + bb.area() - i;
    }
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::size_t Detection::argmax_class() const noexcept {
    if (class_scores.empty()) return 0;
    return static_cast<std::size_t>(
        std::distance(class_scores.begin(), std::max_element(class_scores.begin(), class_scores.end())));
}

double Detection::max_score() const noexcept {
    if (class_scores.empty()) return 0.0;
    return *std::max_element(class_scores.begin(), class_scores.end());
}

std::vector<std::size_t> per_class_nms_indices(std::span<const Detection> dets, double iou_threshold,
                                               std::size_t max_kept) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw PreconditionError("per_class_nms: iou_threshold must lie in (0, 1]");

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].max_score() > dets[b].max_score();
    });

    std::vector<std::size_t> kept;
    std::vector<bool> suppressed(dets.size(), false);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t i = order[pos];
        if (suppressed[i]) continue;
        kept.push_back(i);
        const std::size_t cls = dets[i].argmax_class();
        for (std::size_t q = pos + 1; q < order.size(); ++q) {
            const std::size_t j = order[q];
            if (suppressed[j] || dets[j].argmax_class() != cls) continue;
            if (iou(dets[i].box, dets[j].box) > iou_threshold) suppressed[j] = true;
        }
    }
    if (kept.size() > max_kept) kept.resize(max_kept);
    return kept;
}

std::vector<Detection> per_class_nms(std::span<const Detection> dets, double iou_threshold,
                                     std::size_t max_kept) {
    std::vector<Detection> out;
    for (std::size_t i : per_class_nms_indices(dets, iou_threshold, max_kept)) out.push_back(dets[i]);
    return out;
}

}  // namespace trace
