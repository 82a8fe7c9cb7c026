#include "trace/config.hpp"

#include <json.hpp>

#include "trace/constants.hpp"
#include "trace/errors.hpp"

namespace trace {

TemporalMode parse_temporal_mode(std::string_view s) {
    if (s == "attention") return TemporalMode::Attention;
    if (s == "difference") return TemporalMode::Difference;
    if (s == "none") return TemporalMode::None;
    throw ConfigError("config: unknown temporal mode '" + std::string(s) + "'");
}

ScoreMode parse_score_mode(std::string_view s) {
    if (s == "average") return ScoreMode::Average;
    if (s == "maximum") return ScoreMode::Maximum;
    throw ConfigError("config: unknown score mode '" + std::string(s) + "'");
}

EvalMode parse_eval_mode(std::string_view s) {
    if (s == "sgdet") return EvalMode::SGDet;
    if (s == "sgcls") return EvalMode::SGCls;
    if (s == "predcls") return EvalMode::PredCls;
    throw ConfigError("config: unknown mode '" + std::string(s) + "'");
}

std::string_view to_string(TemporalMode m) noexcept {
    switch (m) {
        case TemporalMode::Attention: return "attention";
        case TemporalMode::Difference: return "difference";
        case TemporalMode::None: return "none";
    }
    return "?";
}

std::string_view to_string(ScoreMode m) noexcept { return m == ScoreMode::Average ? "average" : "maximum"; }

std::string_view to_string(EvalMode m) noexcept {
    switch (m) {
        case EvalMode::SGDet: return "sgdet";
        case EvalMode::SGCls: return "sgcls";
        case EvalMode::PredCls: return "predcls";
    }
    return "?";
}

Config::Config() {
    const ProtocolConstants& c = constants();
    groups = c.default_groups.value;
    heads = c.default_heads.value;
    temporal_window = c.temporal_window.value;
    temporal_stride = c.temporal_stride.value;
    top_proposals = c.top_proposals.value;
    nms_iou = c.nms_iou.value;
    k_per_pair = c.k_per_pair_frame_level.value[0];
    recall_ks.assign(c.recall_ks.value.begin(), c.recall_ks.value.end());
    frame_limit = c.frame_triplet_limit.value;
    hit_iou = c.hit_iou.value;
    segment_length = c.segment_length.value;
    segment_interval = c.segment_interval.value;
    sample_stride = c.linking_sample_stride.value;
    viou_threshold = c.viou.value;
    prior_alpha = c.prior_alpha.value;
}

void Config::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw ConfigError(std::string("config: ") + name + " must be >= 1");
    };
    auto unit = [](double v, const char* name) {
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError(std::string("config: ") + name + " must lie in (0, 1]");
    };
    positive(groups, "groups");
    positive(heads, "heads");
    positive(temporal_window, "T");
    positive(temporal_stride, "stride_v");
    positive(top_proposals, "top_proposals");
    positive(k_per_pair, "k_per_pair");
    positive(frame_limit, "frame_limit");
    positive(segment_length, "seg_len");
    positive(segment_interval, "seg_interval");
    positive(sample_stride, "sample_stride");
    positive(node_pool.height, "node_pool");
    positive(node_pool.width, "node_pool");
    positive(relation_pool.height, "relation_pool");
    positive(relation_pool.width, "relation_pool");
    if (recall_ks.empty()) throw ConfigError("config: K list must not be empty");
    for (std::size_t k : recall_ks) positive(k, "K");
    unit(nms_iou, "nms_iou");
    unit(hit_iou, "hit_iou");
    unit(viou_threshold, "viou_threshold");
    if (!(prior_alpha > 0.0)) throw ConfigError("config: prior_alpha must be positive");
    if (segment_interval > segment_length)
        throw ConfigError("config: seg_interval must not exceed seg_len (segments must overlap or touch)");
    if (temporal_mode == TemporalMode::Difference && temporal_window < 2)
        throw ConfigError("config: difference fusion needs T >= 2");
}

std::string Config::to_json() const {
    nlohmann::ordered_json j;
    j["scheme"] = static_cast<int>(scheme);
    j["groups"] = groups;
    j["heads"] = heads;
    j["temporal_mode"] = to_string(temporal_mode);
    j["top_down_input"] = top_down_input == TopDownInput::NodeFeature ? "node_feature" : "bottom_up_state";
    j["T"] = temporal_window;
    j["stride_v"] = temporal_stride;
    j["top_proposals"] = top_proposals;
    j["nms_iou"] = nms_iou;
    j["k_per_pair"] = k_per_pair;
    j["K"] = recall_ks;
    j["frame_limit"] = frame_limit;
    j["hit_iou"] = hit_iou;
    j["seg_len"] = segment_length;
    j["seg_interval"] = segment_interval;
    j["sample_stride"] = sample_stride;
    j["viou_threshold"] = viou_threshold;
    j["score_mode"] = to_string(score_mode);
    j["overlap_only"] = overlap_only;
    j["mode"] = to_string(mode);
    j["prior_alpha"] = prior_alpha;
    j["node_pool"] = {node_pool.height, node_pool.width};
    j["relation_pool"] = {relation_pool.height, relation_pool.width};
    j["seed"] = seed;
    return j.dump();
}

}  // namespace trace
