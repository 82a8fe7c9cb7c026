#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trace/kernels.hpp"
#include "trace/tensor.hpp"

namespace trace {

// Row per object class.
struct EmbeddingTable {
    Tensor matrix;  // [num_object_classes x e]

    std::size_t classes() const { return matrix.dim(0); }
    std::size_t width() const { return matrix.dim(1); }

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

class FrequencyTable {
public:
    FrequencyTable() = default;
    FrequencyTable(std::size_t object_classes, std::size_t relation_classes);

    std::size_t object_classes() const noexcept { return objects_; }
    std::size_t relation_classes() const noexcept { return relations_; }

    std::uint64_t count(std::size_t subj, std::size_t obj, std::size_t rel) const;
    void add(std::size_t subj, std::size_t obj, std::size_t rel, std::uint64_t n = 1);
    std::uint64_t pair_total(std::size_t subj, std::size_t obj) const;
    std::uint64_t total() const noexcept;
    const std::vector<std::uint64_t>& cells() const noexcept { return counts_; }

    friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;

private:
    std::size_t index(std::size_t subj, std::size_t obj, std::size_t rel) const;

    std::size_t objects_ = 0;
    std::size_t relations_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct BranchLogits {
    std::string branch;
    Vec values;
};

struct VisualBranchResult {
    BranchLogits logits;
    Vec subject_attention;  // softmax over pixels
    Vec object_attention;
};

// rel_map: [C x h x w] over the pair's union box. subj/obj vectors live in the
// reduced width of `vis.reduce`. Parameters: vis.reduce.{weight,bias} [d' x C],
// vis.mlp over [pooled A_s ; pooled A_o ; mean rel_map] (3C).
VisualBranchResult visual_branch(const Tensor& rel_map, std::span<const double> subj_vec,
                                 std::span<const double> obj_vec, const WeightStore& w);

// Soft embedding scores^T * emb.
Vec soft_embedding(std::span<const double> scores, const EmbeddingTable& emb);

// fusion.mlp over [e_s ; e_o ; ctx].
BranchLogits fusion_branch(std::span<const double> subj_scores, std::span<const double> obj_scores,
                           const EmbeddingTable& emb, std::span<const double> ctx_feat, const WeightStore& w);

// so.subj(subject) + so.obj(object).
BranchLogits subject_object_branch(std::span<const double> subj_feat, std::span<const double> obj_feat,
                                   const WeightStore& w);

// Laplace-smoothed log relation frequencies for the class pair.
BranchLogits prior_branch(std::size_t subj_class, std::size_t obj_class, const FrequencyTable& table, double alpha);

Vec sum_logits(std::span<const BranchLogits> branches);
// Elementwise sigmoid of the branch sum; classes are scored independently.
Vec fuse_scores(std::span<const BranchLogits> branches);

struct AnnotatedTriplet {
    std::size_t subj_class = 0;
    std::size_t obj_class = 0;
    std::size_t rel_class = 0;
    std::string locator;  // e.g. "gt_frames.jsonl:12"
};

FrequencyTable build_frequency_table(std::span<const AnnotatedTriplet> annotations, std::size_t object_classes,
                                     std::size_t relation_classes);

}  // namespace trace
