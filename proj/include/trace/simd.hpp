#pragma once

// Dense inner-loop kernels with a scalar reference and an AVX2/FMA variant.
// The variant is picked once at startup from CPUID; callers can pin a backend
// (tests compare the two, the CLI exposes --simd).

#include <cstddef>
#include <span>
#include <string_view>

namespace trace::simd {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y[r] = bias[r] + sum_c w[r * cols + c] * x[c]; bias may be null.
    void (*gemv)(const double* w, const double* bias, const double* x, double* y, std::size_t rows,
                 std::size_t cols);
};

namespace scalar {
const KernelTable& table() noexcept;
}
namespace avx2 {
// Null when the library was built without AVX2 support.
const KernelTable* table() noexcept;
}

bool avx2_available() noexcept;
Backend active_backend() noexcept;
// Throws PreconditionError when the backend is not available on this CPU.
void select_backend(Backend backend);
Backend parse_backend(std::string_view name);  // "scalar" | "avx2" | "auto"
std::string_view backend_name(Backend backend) noexcept;

const KernelTable& kernels() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return kernels().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return kernels().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace trace::simd
