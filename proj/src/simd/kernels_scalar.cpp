#include "trace/simd.hpp"

namespace trace::simd::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* w, const double* bias, const double* x, double* y, std::size_t rows,
          std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = (bias ? bias[r] : 0.0) + dot(w + r * cols, x, cols);
    }
}

}  // namespace

const KernelTable& table() noexcept {
    static const KernelTable t{dot, squared_distance, axpy, gemv};
    return t;
}

}  // namespace trace::simd::scalar
