#pragma once

// Shared generators for the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trace/geometry.hpp"
#include "trace/kernels.hpp"
#include "trace/tensor.hpp"

namespace trace::testing {

class TestRng {
public:
    explicit TestRng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
    }
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % (n == 0 ? 1 : n);
    }
    long between(long lo, long hi) { return lo + static_cast<long>(index(static_cast<std::size_t>(hi - lo + 1))); }
    bool coin(double p = 1.0 / 2.0) { return uniform() < p; }

    std::vector<double> vector(std::size_t n, double lo = -1.0, double hi = 1.0) {
        std::vector<double> v(n);
        for (double& x : v) x = uniform(lo, hi);
        return v;
    }

    Tensor tensor(Shape shape, double lo = -1.0, double hi = 1.0) {
        const std::size_t n = shape_size(shape);
        return Tensor(std::move(shape), vector(n, lo, hi));
    }

    BoundingBox box(double frame_w, double frame_h, double min_side = 2.0, double max_side = 80.0) {
        const double w = uniform(min_side, max_side);
        const double h = uniform(min_side, max_side);
        const double x = uniform(0.0, std::max(1.0, frame_w - w));
        const double y = uniform(0.0, std::max(1.0, frame_h - h));
        return {x, y, x + w, y + h};
    }

    Detection detection(std::size_t classes, double frame_w, double frame_h) {
        Detection d;
        d.box = box(frame_w, frame_h);
        d.class_scores = vector(classes, 0.0, 1.0);
        return d;
    }

private:
    std::mt19937_64 engine_;
};

inline void add_linear(WeightStore& w, TestRng& rng, const std::string& prefix, std::size_t out, std::size_t in,
                       bool bias = true, double scale = 1.0) {
    w.insert(prefix + ".weight", rng.tensor({out, in}, -scale, scale));
    if (bias) w.insert(prefix + ".bias", rng.tensor({out}, -scale, scale));
}

inline void add_gru(WeightStore& w, TestRng& rng, const std::string& prefix, std::size_t in, std::size_t hidden,
                    double scale = 1.0) {
    for (const char* gate : {"z", "r", "h"}) {
        const std::string g(gate);
        w.insert(prefix + ".W" + g, rng.tensor({hidden, in}, -scale, scale));
        w.insert(prefix + ".U" + g, rng.tensor({hidden, hidden}, -scale, scale));
        w.insert(prefix + ".b" + g, rng.tensor({hidden}, -scale, scale));
    }
}

// Layer widths dims[0] -> dims[1] -> ... as prefix.0, prefix.1, ...
inline void add_mlp(WeightStore& w, TestRng& rng, const std::string& prefix, const std::vector<std::size_t>& dims,
                    double scale = 1.0) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        add_linear(w, rng, prefix + "." + std::to_string(i), dims[i + 1], dims[i], true, scale);
}

inline void add_attention(WeightStore& w, TestRng& rng, const std::string& prefix, std::size_t query,
                          std::size_t key, std::size_t model, std::size_t out, double scale = 1.0) {
    w.insert(prefix + ".Wq", rng.tensor({model, query}, -scale, scale));
    w.insert(prefix + ".bq", rng.tensor({model}, -scale, scale));
    w.insert(prefix + ".Wk", rng.tensor({model, key}, -scale, scale));
    w.insert(prefix + ".bk", rng.tensor({model}, -scale, scale));
    w.insert(prefix + ".Wv", rng.tensor({model, key}, -scale, scale));
    w.insert(prefix + ".bv", rng.tensor({model}, -scale, scale));
    w.insert(prefix + ".Wo", rng.tensor({out, model}, -scale, scale));
    w.insert(prefix + ".bo", rng.tensor({out}, -scale, scale));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace trace::testing
