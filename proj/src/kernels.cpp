#include "trace/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "trace/errors.hpp"
#include "trace/simd.hpp"

namespace trace {
namespace {

const Tensor& param(const WeightStore& w, const std::string& name, const Shape& shape) {
    return w.get(name, shape);
}

Vec gemv(const Tensor& weight, const Tensor* bias, std::span<const double> x) {
    const std::size_t rows = weight.dim(0);
    const std::size_t cols = weight.dim(1);
    Vec y(rows);
    simd::kernels().gemv(weight.data().data(), bias ? bias->data().data() : nullptr, x.data(), y.data(), rows,
                         cols);
    return y;
}

}  // namespace

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vec softmax(std::span<const double> v) {
    Vec out(v.size());
    if (v.empty()) return out;
    const double mx = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        total += out[i];
    }
    for (double& o : out) o /= total;
    return out;
}

std::size_t linear_out_dim(const WeightStore& w, const std::string& prefix) {
    const Tensor& weight = w.get(prefix + ".weight");
    if (weight.rank() != 2) throw ConfigError("weights: parameter '" + prefix + ".weight' must be rank 2");
    return weight.dim(0);
}

Vec linear(std::span<const double> x, const WeightStore& w, const std::string& prefix, bool with_bias) {
    const Tensor& weight = w.get(prefix + ".weight");
    if (weight.rank() != 2 || weight.dim(1) != x.size())
        throw ConfigError("weights: parameter '" + prefix + ".weight' has shape " + shape_string(weight.shape()) +
                          ", input has " + std::to_string(x.size()) + " features");
    const Tensor* bias = with_bias ? &param(w, prefix + ".bias", {weight.dim(0)}) : nullptr;
    return gemv(weight, bias, x);
}

Vec gru_cell(std::span<const double> x, std::span<const double> h_prev, const WeightStore& w,
             const std::string& prefix) {
    const std::size_t nx = x.size();
    const std::size_t nh = h_prev.size();
    const std::string p = prefix + ".";
    const Tensor& wz = param(w, p + "Wz", {nh, nx});
    const Tensor& uz = param(w, p + "Uz", {nh, nh});
    const Tensor& bz = param(w, p + "bz", {nh});
    const Tensor& wr = param(w, p + "Wr", {nh, nx});
    const Tensor& ur = param(w, p + "Ur", {nh, nh});
    const Tensor& br = param(w, p + "br", {nh});
    const Tensor& wh = param(w, p + "Wh", {nh, nx});
    const Tensor& uh = param(w, p + "Uh", {nh, nh});
    const Tensor& bh = param(w, p + "bh", {nh});

    const Vec zx = gemv(wz, &bz, x);
    const Vec zh = gemv(uz, nullptr, h_prev);
    const Vec rx = gemv(wr, &br, x);
    const Vec rh = gemv(ur, nullptr, h_prev);

    Vec gated(nh);
    Vec z(nh);
    for (std::size_t i = 0; i < nh; ++i) {
        z[i] = sigmoid(zx[i] + zh[i]);
        gated[i] = sigmoid(rx[i] + rh[i]) * h_prev[i];
    }
    const Vec cx = gemv(wh, &bh, x);
    const Vec ch = gemv(uh, nullptr, gated);

    Vec out(nh);
    for (std::size_t i = 0; i < nh; ++i) {
        const double cand = std::tanh(cx[i] + ch[i]);
        out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * cand;
    }
    return out;
}

std::size_t mlp_layer_count(const WeightStore& w, const std::string& prefix) {
    std::size_t n = 0;
    while (w.contains(prefix + "." + std::to_string(n) + ".weight")) ++n;
    return n;
}

void check_mlp(const WeightStore& w, const std::string& prefix, std::size_t in_dim, std::size_t out_dim) {
    const std::size_t layers = mlp_layer_count(w, prefix);
    if (layers == 0) throw ConfigError("weights: missing parameter '" + prefix + ".0.weight'");
    std::size_t width = in_dim;
    for (std::size_t i = 0; i < layers; ++i) {
        const std::string name = prefix + "." + std::to_string(i);
        const Tensor& weight = w.get(name + ".weight");
        if (weight.rank() != 2 || weight.dim(1) != width)
            throw ConfigError("weights: parameter '" + name + ".weight' has shape " +
                              shape_string(weight.shape()) + ", expected input width " + std::to_string(width));
        w.get(name + ".bias", {weight.dim(0)});
        width = weight.dim(0);
    }
    if (width != out_dim)
        throw ConfigError("weights: MLP '" + prefix + "' produces " + std::to_string(width) + " outputs, expected " +
                          std::to_string(out_dim));
}

Vec mlp_forward(std::span<const double> x, const WeightStore& w, const std::string& prefix) {
    const std::size_t layers = mlp_layer_count(w, prefix);
    if (layers == 0) throw ConfigError("weights: missing parameter '" + prefix + ".0.weight'");
    Vec h(x.begin(), x.end());
    for (std::size_t i = 0; i < layers; ++i) {
        h = linear(h, w, prefix + "." + std::to_string(i));
        if (i + 1 < layers)
            for (double& v : h) v = std::max(0.0, v);
    }
    return h;
}

AttentionTrace multi_head_attention_trace(std::span<const double> query, std::span<const Vec> keys,
                                          std::span<const Vec> values, const WeightStore& w,
                                          const std::string& prefix, std::size_t heads) {
    if (keys.empty() || keys.size() != values.size())
        throw PreconditionError("attention: keys and values must be non-empty and of equal length");
    if (heads == 0) throw ConfigError("attention: head count must be positive");

    const std::string p = prefix + ".";
    const Tensor& wq = w.get(p + "Wq");
    if (wq.rank() != 2 || wq.dim(1) != query.size())
        throw ConfigError("weights: parameter '" + p + "Wq' does not match query width " +
                          std::to_string(query.size()));
    const std::size_t model = wq.dim(0);
    if (model % heads != 0)
        throw ConfigError("attention: model width " + std::to_string(model) + " not divisible by " +
                          std::to_string(heads) + " heads");
    const std::size_t kdim = keys.front().size();
    const Tensor& bq = param(w, p + "bq", {model});
    const Tensor& wk = param(w, p + "Wk", {model, kdim});
    const Tensor& bk = param(w, p + "bk", {model});
    const Tensor& wv = param(w, p + "Wv", {model, values.front().size()});
    const Tensor& bv = param(w, p + "bv", {model});
    const Tensor& wo = w.get(p + "Wo");
    if (wo.rank() != 2 || wo.dim(1) != model)
        throw ConfigError("weights: parameter '" + p + "Wo' must have " + std::to_string(model) + " columns");
    const Tensor& bo = param(w, p + "bo", {wo.dim(0)});

    const std::size_t steps = keys.size();
    const std::size_t dh = model / heads;
    const Vec q = gemv(wq, &bq, query);
    std::vector<Vec> k(steps), v(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        if (keys[t].size() != kdim || values[t].size() != values.front().size())
            throw PreconditionError("attention: inconsistent key/value widths across timesteps");
        k[t] = gemv(wk, &bk, keys[t]);
        v[t] = gemv(wv, &bv, values[t]);
    }

    AttentionTrace tr;
    tr.head_weights.resize(heads);
    tr.head_outputs.resize(heads);
    tr.head_values.resize(heads);
    Vec concat(model, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t hd = 0; hd < heads; ++hd) {
        const std::size_t off = hd * dh;
        const std::span<const double> qh(q.data() + off, dh);
        Vec logits(steps);
        for (std::size_t t = 0; t < steps; ++t)
            logits[t] = simd::dot(qh, std::span<const double>(k[t].data() + off, dh)) * scale;
        tr.head_weights[hd] = softmax(logits);
        Vec out(dh, 0.0);
        tr.head_values[hd].resize(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            const std::span<const double> vh(v[t].data() + off, dh);
            tr.head_values[hd][t].assign(vh.begin(), vh.end());
            simd::axpy(tr.head_weights[hd][t], vh, out);
        }
        std::copy(out.begin(), out.end(), concat.begin() + static_cast<std::ptrdiff_t>(off));
        tr.head_outputs[hd] = std::move(out);
    }
    tr.output = gemv(wo, &bo, concat);
    return tr;
}

Vec multi_head_attention(std::span<const double> query, std::span<const Vec> keys, std::span<const Vec> values,
                         const WeightStore& w, const std::string& prefix, std::size_t heads) {
    return multi_head_attention_trace(query, keys, values, w, prefix, heads).output;
}

double bilinear_sample(const Tensor& grid, std::size_t c, double x, double y) noexcept {
    const std::size_t height = grid.dim(1);
    const std::size_t width = grid.dim(2);
    const double u = std::clamp(x - 1.0 / 2.0, 0.0, static_cast<double>(width - 1));
    const double v = std::clamp(y - 1.0 / 2.0, 0.0, static_cast<double>(height - 1));
    const auto x0 = static_cast<std::size_t>(std::floor(u));
    const auto y0 = static_cast<std::size_t>(std::floor(v));
    const std::size_t x1 = std::min(x0 + 1, width - 1);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const double fx = u - static_cast<double>(x0);
    const double fy = v - static_cast<double>(y0);
    const double top = grid.at(c, y0, x0) * (1.0 - fx) + grid.at(c, y0, x1) * fx;
    const double bottom = grid.at(c, y1, x0) * (1.0 - fx) + grid.at(c, y1, x1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

Tensor roi_align(const Tensor& grid, const BoundingBox& box, std::size_t out_h, std::size_t out_w) {
    if (grid.rank() != 3 || grid.dim(1) == 0 || grid.dim(2) == 0)
        throw PreconditionError("roi_align: grid must be a non-empty [C x H x W] tensor");
    if (out_h == 0 || out_w == 0) throw PreconditionError("roi_align: output size must be positive");
    const std::size_t channels = grid.dim(0);
    const double bin_w = std::max(0.0, box.x2 - box.x1) / static_cast<double>(out_w);
    const double bin_h = std::max(0.0, box.y2 - box.y1) / static_cast<double>(out_h);
    Tensor out({channels, out_h, out_w});
    for (std::size_t i = 0; i < out_h; ++i) {
        const double y = box.y1 + (static_cast<double>(i) + 1.0 / 2.0) * bin_h;
        for (std::size_t j = 0; j < out_w; ++j) {
            const double x = box.x1 + (static_cast<double>(j) + 1.0 / 2.0) * bin_w;
            for (std::size_t c = 0; c < channels; ++c) out[(c * out_h + i) * out_w + j] = bilinear_sample(grid, c, x, y);
        }
    }
    return out;
}

Vec spatial_mean(const Tensor& map) {
    if (map.rank() != 3) throw PreconditionError("spatial_mean: expected a [C x H x W] tensor");
    const std::size_t channels = map.dim(0);
    const std::size_t pixels = map.dim(1) * map.dim(2);
    Vec out(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) acc += map[c * pixels + p];
        out[c] = acc / static_cast<double>(pixels);
    }
    return out;
}

}  // namespace trace
