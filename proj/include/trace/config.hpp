#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "trace/contextagg.hpp"
#include "trace/hrtree.hpp"

namespace trace {

enum class TemporalMode { Attention, Difference, None };
enum class ScoreMode { Average, Maximum };
enum class EvalMode { SGDet, SGCls, PredCls };

TemporalMode parse_temporal_mode(std::string_view s);
ScoreMode parse_score_mode(std::string_view s);
EvalMode parse_eval_mode(std::string_view s);
std::string_view to_string(TemporalMode m) noexcept;
std::string_view to_string(ScoreMode m) noexcept;
std::string_view to_string(EvalMode m) noexcept;

// Resolved run configuration. Defaults come from constants().
struct Config {
    CenterScheme scheme = CenterScheme::Alternating;
    std::size_t groups;
    std::size_t heads;
    TemporalMode temporal_mode = TemporalMode::Attention;
    TopDownInput top_down_input = TopDownInput::NodeFeature;
    std::size_t temporal_window;  // T
    std::size_t temporal_stride;  // v
    std::size_t top_proposals;
    double nms_iou;
    std::size_t k_per_pair;
    std::vector<std::size_t> recall_ks;
    std::size_t frame_limit;
    double hit_iou;
    std::size_t segment_length;
    std::size_t segment_interval;
    std::size_t sample_stride;
    double viou_threshold;
    ScoreMode score_mode = ScoreMode::Average;
    bool overlap_only = true;
    EvalMode mode = EvalMode::SGDet;
    double prior_alpha;
    PoolSize node_pool{2, 2};
    PoolSize relation_pool{4, 4};
    std::uint64_t seed = 0;

    Config();

    // Throws ConfigError on a count below 1 or a threshold outside (0, 1].
    void validate() const;
    // Stable one-line JSON rendering of every field.
    std::string to_json() const;
};

}  // namespace trace
