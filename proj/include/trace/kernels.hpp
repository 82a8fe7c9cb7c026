#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trace/geometry.hpp"
#include "trace/tensor.hpp"

namespace trace {

using Vec = std::vector<double>;

double sigmoid(double x) noexcept;

// Max-subtracted softmax.
Vec softmax(std::span<const double> v);

// y = W x (+ b). Parameters `<prefix>.weight` [out x in] and, when `with_bias`,
// `<prefix>.bias` [out].
Vec linear(std::span<const double> x, const WeightStore& w, const std::string& prefix, bool with_bias = true);
// Output width of `<prefix>.weight`.
std::size_t linear_out_dim(const WeightStore& w, const std::string& prefix);

// GRU cell with parameters <prefix>.{Wz,Uz,bz,Wr,Ur,br,Wh,Uh,bh}:
//   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
//   c = tanh(Wh x + Uh (r*h) + bh), h' = (1 - z) * h + z * c.
Vec gru_cell(std::span<const double> x, std::span<const double> h_prev, const WeightStore& w,
             const std::string& prefix);

// MLP with layers <prefix>.<i>.weight / <prefix>.<i>.bias for i = 0..L-1;
// ReLU between layers, final layer linear.
Vec mlp_forward(std::span<const double> x, const WeightStore& w, const std::string& prefix);
std::size_t mlp_layer_count(const WeightStore& w, const std::string& prefix);
// Throws ConfigError unless the MLP exists and maps `in_dim` -> `out_dim`
// through consistently chained layers.
void check_mlp(const WeightStore& w, const std::string& prefix, std::size_t in_dim, std::size_t out_dim);

// Intermediate values of one attention evaluation, kept for inspection.
struct AttentionTrace {
    Vec output;                                  // after the output projection
    std::vector<Vec> head_weights;               // [heads][T]
    std::vector<Vec> head_outputs;               // [heads][d_head], before the output projection
    std::vector<std::vector<Vec>> head_values;   // [heads][T][d_head], projected values
};

// Scaled dot-product attention with `heads` heads. Parameters:
//   <prefix>.Wq [m x q], .bq [m], .Wk [m x k], .bk [m], .Wv [m x k], .bv [m],
//   .Wo [o x m], .bo [o]; m divisible by heads.
AttentionTrace multi_head_attention_trace(std::span<const double> query, std::span<const Vec> keys,
                                          std::span<const Vec> values, const WeightStore& w,
                                          const std::string& prefix, std::size_t heads);
Vec multi_head_attention(std::span<const double> query, std::span<const Vec> keys, std::span<const Vec> values,
                         const WeightStore& w, const std::string& prefix, std::size_t heads);

// Bilinear sample of channel c at continuous grid position (x, y); cell k is
// centred at k + 1/2, positions clamp to the edge cells.
double bilinear_sample(const Tensor& grid, std::size_t c, double x, double y) noexcept;

// One bilinear sample per output bin, at the bin centre. `box` is in grid
// coordinates. Returns [C x out_h x out_w].
Tensor roi_align(const Tensor& grid, const BoundingBox& box, std::size_t out_h, std::size_t out_w);

// Mean over the spatial axes of a [C x H x W] tensor.
Vec spatial_mean(const Tensor& map);

}  // namespace trace
