#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "shiftuq/kernels.hpp"

namespace shiftuq::kernels {

#ifdef SHIFTUQ_HAVE_AVX2
const KernelTable& avx2_kernels() noexcept;
#endif

const KernelTable* avx2_table() noexcept {
#ifdef SHIFTUQ_HAVE_AVX2
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    if (supported) return &avx2_kernels();
#endif
    return nullptr;
}

namespace {

const KernelTable* detect() {
    if (const char* env = std::getenv("SHIFTUQ_SIMD")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2") {
            if (const auto* t = avx2_table()) return t;
            throw std::runtime_error("SHIFTUQ_SIMD=avx2 requested but AVX2/FMA is unavailable");
        }
        if (!want.empty()) throw std::runtime_error("unknown SHIFTUQ_SIMD level '" + want + "'");
    }
    if (const auto* t = avx2_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& active() noexcept {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        try {
            t = detect();
        } catch (...) {
            t = &scalar_table();
        }
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void set_level(SimdLevel level) {
    if (level == SimdLevel::Scalar) {
        g_active.store(&scalar_table(), std::memory_order_release);
        return;
    }
    const auto* t = avx2_table();
    if (t == nullptr) throw std::runtime_error("AVX2 kernels unavailable on this machine");
    g_active.store(t, std::memory_order_release);
}

std::string_view level_name(SimdLevel level) noexcept {
    return level == SimdLevel::Avx2 ? "avx2" : "scalar";
}

}  // namespace shiftuq::kernels
