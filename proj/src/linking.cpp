#include "trace/linking.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>
#include <tuple>

#include "trace/errors.hpp"

namespace trace {

std::vector<Segment> plan_segments(long num_frames, std::size_t seg_len, std::size_t interval) {
    if (seg_len == 0 || interval == 0) throw ConfigError("linking: segment length and interval must be positive");
    std::vector<Segment> out;
    const long len = static_cast<long>(seg_len);
    for (long start = 0; start < num_frames; start += static_cast<long>(interval)) {
        out.push_back({out.size(), start, std::min(start + len, num_frames)});
        if (start + len >= num_frames) break;
    }
    return out;
}

std::vector<long> sampled_frames(const Segment& segment, std::size_t stride) {
    if (stride == 0) throw ConfigError("linking: sample stride must be positive");
    std::vector<long> out;
    for (long f = segment.begin; f < segment.end; f += static_cast<long>(stride)) out.push_back(f);
    return out;
}

MergeResult merge_segment_triplets(std::span<const SceneGraph> frame_graphs, const SegmentTracks& tracks,
                                   std::size_t sample_stride) {
    const std::vector<long> frames = sampled_frames(tracks.segment, sample_stride);
    const std::set<long> sampled(frames.begin(), frames.end());

    using Key = std::tuple<TrajectoryId, TrajectoryId, std::size_t, std::size_t, std::size_t>;
    std::map<Key, std::pair<double, std::size_t>> groups;
    MergeResult result;
    for (const SceneGraph& g : frame_graphs) {
        if (!sampled.count(g.frame)) continue;
        for (const TripletPrediction& t : g.triplets) {
            const auto s = tracks.detection_to_trajectory.find({g.frame, g.source_indices.at(t.subj_idx)});
            const auto o = tracks.detection_to_trajectory.find({g.frame, g.source_indices.at(t.obj_idx)});
            if (s == tracks.detection_to_trajectory.end() || o == tracks.detection_to_trajectory.end() ||
                !tracks.trajectories.count(s->second) || !tracks.trajectories.count(o->second)) {
                ++result.dropped;
                continue;
            }
            auto& acc = groups[{s->second, o->second, t.subj_class, t.obj_class, t.rel_class}];
            acc.first += t.score;
            acc.second += 1;
        }
    }
    for (const auto& [key, acc] : groups) {
        SegmentTriplet st;
        st.segment = tracks.segment.id;
        std::tie(st.subj_id, st.obj_id, st.subj_class, st.obj_class, st.rel_class) = key;
        st.subj_traj = tracks.trajectories.at(st.subj_id);
        st.obj_traj = tracks.trajectories.at(st.obj_id);
        st.score = acc.first;
        st.support = acc.second;
        result.triplets.push_back(std::move(st));
    }
    return result;
}

Trajectory concatenate(const Trajectory& earlier, const Trajectory& later) {
    if (earlier.boxes.empty()) return later;
    Trajectory out = earlier;
    if (later.boxes.empty() || later.end_frame() <= out.end_frame()) return out;
    if (later.start_frame > out.end_frame()) {
        const BoundingBox a = out.boxes.back();
        const BoundingBox b = later.boxes.front();
        const long last = out.end_frame() - 1;
        const double span = static_cast<double>(later.start_frame - last);
        for (long f = out.end_frame(); f < later.start_frame; ++f) {
            const double t = static_cast<double>(f - last) / span;
            out.boxes.push_back({a.x1 + (b.x1 - a.x1) * t, a.y1 + (b.y1 - a.y1) * t, a.x2 + (b.x2 - a.x2) * t,
                                 a.y2 + (b.y2 - a.y2) * t});
        }
    }
    for (long f = out.end_frame(); f < later.end_frame(); ++f) out.boxes.push_back(later.at(f));
    return out;
}

bool segment_triplet_before(const SegmentTriplet& a, const SegmentTriplet& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.segment, a.subj_id, a.obj_id, a.subj_class, a.obj_class, a.rel_class) <
           std::tie(b.segment, b.subj_id, b.obj_id, b.subj_class, b.obj_class, b.rel_class);
}

std::vector<VideoRelation> associate_segments(std::span<const std::vector<SegmentTriplet>> segments,
                                              std::span<const Segment> bounds, double viou_threshold,
                                              ScoreMode score_mode) {
    if (segments.size() != bounds.size())
        throw PreconditionError("associate_segments: one bound per segment list required");

    struct Ref {
        std::size_t seg;
        std::size_t idx;
    };
    std::vector<Ref> order;
    for (std::size_t s = 0; s < segments.size(); ++s)
        for (std::size_t i = 0; i < segments[s].size(); ++i) order.push_back({s, i});
    auto at = [&](const Ref& r) -> const SegmentTriplet& { return segments[r.seg][r.idx]; };
    auto before = [&](const Ref& a, const Ref& b) {
        const SegmentTriplet& ta = at(a);
        const SegmentTriplet& tb = at(b);
        if (ta.score != tb.score) return ta.score > tb.score;
        if (a.seg != b.seg) return a.seg < b.seg;
        return std::tie(ta.subj_id, ta.obj_id, ta.subj_class, ta.obj_class, ta.rel_class, a.idx) <
               std::tie(tb.subj_id, tb.obj_id, tb.subj_class, tb.obj_class, tb.rel_class, b.idx);
    };
    std::sort(order.begin(), order.end(), before);
    // Rank of every triplet in the global order, for picking the best candidate.
    std::vector<std::vector<std::size_t>> rank(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) rank[s].assign(segments[s].size(), 0);
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r].seg][order[r].idx] = r;

    std::vector<std::vector<bool>> consumed(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) consumed[s].assign(segments[s].size(), false);

    std::vector<VideoRelation> out;
    for (const Ref& seed : order) {
        if (consumed[seed.seg][seed.idx]) continue;
        consumed[seed.seg][seed.idx] = true;
        std::vector<Ref> chain{seed};
        Ref cur = seed;
        for (std::size_t next = cur.seg + 1; next < segments.size(); ++next) {
            const Segment& a = bounds[cur.seg];
            const Segment& b = bounds[next];
            if (next != cur.seg + 1 || b.begin >= a.end) break;
            const long win_lo = b.begin;
            const long win_hi = std::min(a.end, b.end);
            const SegmentTriplet& ct = at(cur);
            const Trajectory cs = ct.subj_traj.clipped(win_lo, win_hi);
            const Trajectory co = ct.obj_traj.clipped(win_lo, win_hi);

            std::optional<Ref> best;
            for (std::size_t i = 0; i < segments[next].size(); ++i) {
                if (consumed[next][i]) continue;
                const SegmentTriplet& cand = segments[next][i];
                if (cand.subj_class != ct.subj_class || cand.obj_class != ct.obj_class ||
                    cand.rel_class != ct.rel_class)
                    continue;
                if (viou(cs, cand.subj_traj.clipped(win_lo, win_hi)) < viou_threshold) continue;
                if (viou(co, cand.obj_traj.clipped(win_lo, win_hi)) < viou_threshold) continue;
                if (!best || rank[next][i] < rank[next][best->idx]) best = Ref{next, i};
            }
            if (!best) break;
            consumed[best->seg][best->idx] = true;
            chain.push_back(*best);
            cur = *best;
        }

        VideoRelation rel;
        const SegmentTriplet& head = at(chain.front());
        rel.subj_class = head.subj_class;
        rel.obj_class = head.obj_class;
        rel.rel_class = head.rel_class;
        double total = 0.0;
        double best_score = head.score;
        for (const Ref& r : chain) {
            const SegmentTriplet& t = at(r);
            rel.subj_traj = concatenate(rel.subj_traj, t.subj_traj);
            rel.obj_traj = concatenate(rel.obj_traj, t.obj_traj);
            total += t.score;
            best_score = std::max(best_score, t.score);
            rel.members.emplace_back(r.seg, r.idx);
        }
        rel.score = score_mode == ScoreMode::Average ? total / static_cast<double>(chain.size()) : best_score;
        out.push_back(std::move(rel));
    }
    return out;
}

LinkResult link_video(std::span<const SceneGraph> frame_graphs, std::span<const SegmentTracks> tracks,
                      const Config& config) {
    LinkResult result;
    std::vector<std::vector<SegmentTriplet>> per_segment;
    std::vector<Segment> bounds;
    for (const SegmentTracks& t : tracks) {
        MergeResult m = merge_segment_triplets(frame_graphs, t, config.sample_stride);
        result.dropped += m.dropped;
        per_segment.push_back(std::move(m.triplets));
        bounds.push_back(t.segment);
    }
    std::vector<std::size_t> idx(bounds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return bounds[a].begin < bounds[b].begin; });
    std::vector<std::vector<SegmentTriplet>> sorted_segments;
    std::vector<Segment> sorted_bounds;
    for (std::size_t i : idx) {
        sorted_segments.push_back(std::move(per_segment[i]));
        sorted_bounds.push_back(bounds[i]);
    }
    result.relations = associate_segments(sorted_segments, sorted_bounds, config.viou_threshold, config.score_mode);
    return result;
}

}  // namespace trace
