#include "trace/relhead.hpp"

#include <cmath>
#include <numeric>

#include "trace/errors.hpp"
#include "trace/simd.hpp"

namespace trace {

FrequencyTable::FrequencyTable(std::size_t object_classes, std::size_t relation_classes)
    : objects_(object_classes),
      relations_(relation_classes),
      counts_(object_classes * object_classes * relation_classes, 0) {}

std::size_t FrequencyTable::index(std::size_t subj, std::size_t obj, std::size_t rel) const {
    if (subj >= objects_ || obj >= objects_ || rel >= relations_)
        throw PreconditionError("frequency table: class id out of range");
    return (subj * objects_ + obj) * relations_ + rel;
}

std::uint64_t FrequencyTable::count(std::size_t subj, std::size_t obj, std::size_t rel) const {
    return counts_[index(subj, obj, rel)];
}

void FrequencyTable::add(std::size_t subj, std::size_t obj, std::size_t rel, std::uint64_t n) {
    counts_[index(subj, obj, rel)] += n;
}

std::uint64_t FrequencyTable::pair_total(std::size_t subj, std::size_t obj) const {
    const std::size_t base = index(subj, obj, 0);
    return std::accumulate(counts_.begin() + static_cast<std::ptrdiff_t>(base),
                           counts_.begin() + static_cast<std::ptrdiff_t>(base + relations_), std::uint64_t{0});
}

std::uint64_t FrequencyTable::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = std::sqrt(simd::dot(a, a));
    const double nb = std::sqrt(simd::dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return simd::dot(a, b) / (na * nb);
}

}  // namespace

VisualBranchResult visual_branch(const Tensor& rel_map, std::span<const double> subj_vec,
                                 std::span<const double> obj_vec, const WeightStore& w) {
    if (rel_map.rank() != 3) throw PreconditionError("visual_branch: relation map must be [C x h x w]");
    const std::size_t channels = rel_map.dim(0);
    const std::size_t pixels = rel_map.dim(1) * rel_map.dim(2);
    const std::size_t reduced = linear_out_dim(w, "vis.reduce");
    if (subj_vec.size() != reduced || obj_vec.size() != reduced)
        throw ConfigError("visual_branch: subject/object vectors must have the reduced width " +
                          std::to_string(reduced));

    Vec subj_score(pixels), obj_score(pixels);
    Vec pixel(channels);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t c = 0; c < channels; ++c) pixel[c] = rel_map[c * pixels + p];
        const Vec r = linear(pixel, w, "vis.reduce");
        subj_score[p] = cosine(r, subj_vec);
        obj_score[p] = cosine(r, obj_vec);
    }

    VisualBranchResult out;
    out.subject_attention = softmax(subj_score);
    out.object_attention = softmax(obj_score);

    Vec pooled(3 * channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const std::span<const double> row(rel_map.data().data() + c * pixels, pixels);
        pooled[c] = simd::dot(row, out.subject_attention);
        pooled[channels + c] = simd::dot(row, out.object_attention);
        double acc = 0.0;
        for (double v : row) acc += v;
        pooled[2 * channels + c] = acc / static_cast<double>(pixels);
    }
    out.logits = {"visual", mlp_forward(pooled, w, "vis.mlp")};
    return out;
}

Vec soft_embedding(std::span<const double> scores, const EmbeddingTable& emb) {
    if (emb.matrix.rank() != 2 || scores.size() != emb.classes())
        throw ConfigError("embedding: score vector has " + std::to_string(scores.size()) + " classes, table has " +
                          std::to_string(emb.matrix.rank() == 2 ? emb.classes() : 0));
    Vec out(emb.width(), 0.0);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const std::span<const double> row(emb.matrix.data().data() + k * emb.width(), emb.width());
        simd::axpy(scores[k], row, out);
    }
    return out;
}

BranchLogits fusion_branch(std::span<const double> subj_scores, std::span<const double> obj_scores,
                           const EmbeddingTable& emb, std::span<const double> ctx_feat, const WeightStore& w) {
    Vec input = soft_embedding(subj_scores, emb);
    const Vec eo = soft_embedding(obj_scores, emb);
    input.insert(input.end(), eo.begin(), eo.end());
    input.insert(input.end(), ctx_feat.begin(), ctx_feat.end());
    return {"fusion", mlp_forward(input, w, "fusion.mlp")};
}

BranchLogits subject_object_branch(std::span<const double> subj_feat, std::span<const double> obj_feat,
                                   const WeightStore& w) {
    Vec logits = mlp_forward(subj_feat, w, "so.subj");
    const Vec obj = mlp_forward(obj_feat, w, "so.obj");
    if (obj.size() != logits.size())
        throw ConfigError("weights: 'so.subj' and 'so.obj' produce different relation counts");
    for (std::size_t r = 0; r < logits.size(); ++r) logits[r] += obj[r];
    return {"subject_object", std::move(logits)};
}

BranchLogits prior_branch(std::size_t subj_class, std::size_t obj_class, const FrequencyTable& table, double alpha) {
    if (!(alpha > 0.0)) throw PreconditionError("prior_branch: alpha must be positive");
    const std::size_t rels = table.relation_classes();
    const double denom = static_cast<double>(table.pair_total(subj_class, obj_class)) + alpha * static_cast<double>(rels);
    Vec logits(rels);
    for (std::size_t r = 0; r < rels; ++r)
        logits[r] = std::log((static_cast<double>(table.count(subj_class, obj_class, r)) + alpha) / denom);
    return {"prior", std::move(logits)};
}

Vec sum_logits(std::span<const BranchLogits> branches) {
    if (branches.empty()) return {};
    Vec total(branches.front().values.size(), 0.0);
    for (const BranchLogits& b : branches) {
        if (b.values.size() != total.size())
            throw PreconditionError("fuse_scores: branch '" + b.branch + "' has " + std::to_string(b.values.size()) +
                                    " classes, expected " + std::to_string(total.size()));
        for (std::size_t r = 0; r < total.size(); ++r) total[r] += b.values[r];
    }
    return total;
}

Vec fuse_scores(std::span<const BranchLogits> branches) {
    Vec total = sum_logits(branches);
    for (double& v : total) v = sigmoid(v);
    return total;
}

FrequencyTable build_frequency_table(std::span<const AnnotatedTriplet> annotations, std::size_t object_classes,
                                     std::size_t relation_classes) {
    FrequencyTable table(object_classes, relation_classes);
    for (const AnnotatedTriplet& a : annotations) {
        if (a.subj_class >= object_classes || a.obj_class >= object_classes || a.rel_class >= relation_classes)
            throw IngestError("frequency table: class id out of range at " +
                              (a.locator.empty() ? std::string("<unknown record>") : a.locator));
        table.add(a.subj_class, a.obj_class, a.rel_class);
    }
    return table;
}

}  // namespace trace
