#include <atomic>
#include <string>

#include "trace/errors.hpp"
#include "trace/simd.hpp"

namespace trace::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect() noexcept { return avx2_available() ? Backend::Avx2 : Backend::Scalar; }

std::atomic<Backend>& current() noexcept {
    static std::atomic<Backend> backend{detect()};
    return backend;
}

}  // namespace

bool avx2_available() noexcept {
    static const bool ok = avx2::table() != nullptr && cpu_has_avx2();
    return ok;
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void select_backend(Backend backend) {
    if (backend == Backend::Avx2 && !avx2_available())
        throw PreconditionError("simd: AVX2 backend requested but not available on this CPU");
    current().store(backend, std::memory_order_relaxed);
}

Backend parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2") return Backend::Avx2;
    if (name == "auto") return detect();
    throw ConfigError("simd: unknown backend '" + std::string(name) + "' (expected scalar, avx2 or auto)");
}

std::string_view backend_name(Backend backend) noexcept {
    return backend == Backend::Avx2 ? "avx2" : "scalar";
}

const KernelTable& kernels() noexcept {
    if (active_backend() == Backend::Avx2) return *avx2::table();
    return scalar::table();
}

}  // namespace trace::simd
