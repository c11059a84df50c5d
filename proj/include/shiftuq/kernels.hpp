#pragma once

// Data-parallel inner loops used by training (GEMM, tanh, Adam), kNN scoring
// (distances against a transposed reference matrix) and GMM evaluation.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at runtime from the CPU
// features; SHIFTUQ_SIMD=scalar|avx2 overrides the choice.

#include <cstddef>
#include <string_view>

namespace shiftuq::kernels {

enum class SimdLevel { Scalar, Avx2 };

struct KernelTable {
    SimdLevel level;
    /// C[m x n] += A[m x k] * B[k x n], all row-major and densely packed.
    void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                     const double* b, double* c);
    /// dst[c x r] = transpose(src[r x c]).
    void (*transpose)(std::size_t r, std::size_t c, const double* src, double* dst);
    void (*tanh_inplace)(double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// out[j] = sum_t (q[t] - refs_t[t*n + j])^2, summed in increasing t.
    /// Bit-identical across variants (no fused multiply-add, fixed order).
    void (*sq_dist_to_rows)(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                            double* out);
    /// out[j] = sum_t q[t] * refs_t[t*n + j], same ordering contract.
    void (*dot_to_rows)(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                        double* out);
    /// One Adam step with bias-corrected step size `lr_t`.
    void (*adam_step)(double* w, double* m, double* v, const double* g, std::size_t n,
                      double lr_t, double beta1, double beta2, double eps);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when not compiled in or not supported by this CPU.
const KernelTable* avx2_table() noexcept;

const KernelTable& active() noexcept;
/// Forces a level (tests, benchmarks). Throws if unsupported.
void set_level(SimdLevel level);
std::string_view level_name(SimdLevel level) noexcept;

inline void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                     const double* b, double* c) {
    active().gemm_acc(m, n, k, a, b, c);
}
inline void transpose(std::size_t r, std::size_t c, const double* src, double* dst) {
    active().transpose(r, c, src, dst);
}
inline void tanh_inplace(double* x, std::size_t n) { active().tanh_inplace(x, n); }
inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active().axpy(alpha, x, y, n);
}
inline void sq_dist_to_rows(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                            double* out) {
    active().sq_dist_to_rows(q, refs_t, d, n, out);
}
inline void dot_to_rows(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                        double* out) {
    active().dot_to_rows(q, refs_t, d, n, out);
}
inline void adam_step(double* w, double* m, double* v, const double* g, std::size_t n,
                      double lr_t, double beta1, double beta2, double eps) {
    active().adam_step(w, m, v, g, n, lr_t, beta1, beta2, eps);
}

}  // namespace shiftuq::kernels
