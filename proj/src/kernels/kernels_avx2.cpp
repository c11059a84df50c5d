// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "shiftuq/kernels.hpp"

namespace shiftuq::kernels {
namespace avx2 {

// C[R rows, 8 cols] += A[R rows, k] * B[k, 8 cols]
template <int R>
inline void gemm_block8(std::size_t n, std::size_t k, const double* a, const double* b,
                        double* c) {
    __m256d acc0[R], acc1[R];
    for (int r = 0; r < R; ++r) {
        acc0[r] = _mm256_loadu_pd(c + r * n);
        acc1[r] = _mm256_loadu_pd(c + r * n + 4);
    }
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * n);
        const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
        for (int r = 0; r < R; ++r) {
            const __m256d av = _mm256_broadcast_sd(a + r * k + p);
            acc0[r] = _mm256_fmadd_pd(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_pd(av, b1, acc1[r]);
        }
    }
    for (int r = 0; r < R; ++r) {
        _mm256_storeu_pd(c + r * n, acc0[r]);
        _mm256_storeu_pd(c + r * n + 4, acc1[r]);
    }
}

template <int R>
inline void gemm_block4(std::size_t n, std::size_t k, const double* a, const double* b,
                        double* c) {
    __m256d acc[R];
    for (int r = 0; r < R; ++r) acc[r] = _mm256_loadu_pd(c + r * n);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * n);
        for (int r = 0; r < R; ++r)
            acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * k + p), b0, acc[r]);
    }
    for (int r = 0; r < R; ++r) _mm256_storeu_pd(c + r * n, acc[r]);
}

template <int R>
inline void gemm_rows(std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) gemm_block8<R>(n, k, a, b + j, c + j);
    for (; j + 4 <= n; j += 4) gemm_block4<R>(n, k, a, b + j, c + j);
    for (; j < n; ++j) {
        for (int r = 0; r < R; ++r) {
            double s = c[r * n + j];
            for (std::size_t p = 0; p < k; ++p) s = std::fma(a[r * k + p], b[p * n + j], s);
            c[r * n + j] = s;
        }
    }
}

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
              double* c) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) gemm_rows<4>(n, k, a + i * k, b, c + i * n);
    for (; i < m; ++i) gemm_rows<1>(n, k, a + i * k, b, c + i * n);
}

void transpose(std::size_t r, std::size_t c, const double* src, double* dst) {
    std::size_t i = 0;
    for (; i + 4 <= r; i += 4) {
        std::size_t j = 0;
        for (; j + 4 <= c; j += 4) {
            const __m256d r0 = _mm256_loadu_pd(src + (i + 0) * c + j);
            const __m256d r1 = _mm256_loadu_pd(src + (i + 1) * c + j);
            const __m256d r2 = _mm256_loadu_pd(src + (i + 2) * c + j);
            const __m256d r3 = _mm256_loadu_pd(src + (i + 3) * c + j);
            const __m256d t0 = _mm256_unpacklo_pd(r0, r1);
            const __m256d t1 = _mm256_unpackhi_pd(r0, r1);
            const __m256d t2 = _mm256_unpacklo_pd(r2, r3);
            const __m256d t3 = _mm256_unpackhi_pd(r2, r3);
            _mm256_storeu_pd(dst + (j + 0) * r + i, _mm256_permute2f128_pd(t0, t2, 0x20));
            _mm256_storeu_pd(dst + (j + 1) * r + i, _mm256_permute2f128_pd(t1, t3, 0x20));
            _mm256_storeu_pd(dst + (j + 2) * r + i, _mm256_permute2f128_pd(t0, t2, 0x31));
            _mm256_storeu_pd(dst + (j + 3) * r + i, _mm256_permute2f128_pd(t1, t3, 0x31));
        }
        for (; j < c; ++j)
            for (std::size_t ii = i; ii < i + 4; ++ii) dst[j * r + ii] = src[ii * c + j];
    }
    for (; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
}

// exp(y) - 1 for y <= 0, accurate near zero.
inline __m256d expm1_nonpos(__m256d y) {
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d inv_ln2 = _mm256_set1_pd(1.44269504088896338700e+00);
    y = _mm256_max_pd(y, _mm256_set1_pd(-700.0));

    const __m256d nf = _mm256_round_pd(_mm256_mul_pd(y, inv_ln2),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(nf, ln2_hi, y);
    r = _mm256_fnmadd_pd(nf, ln2_lo, r);

    // Taylor series of expm1 on |r| <= ln2/2, degree 13.
    static constexpr double coef[] = {1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
                                      1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
                                      1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
                                      1.0 / 24.0,         1.0 / 6.0,         0.5,
                                      1.0};
    __m256d poly = _mm256_set1_pd(coef[0]);
    for (int i = 1; i < 13; ++i) poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(coef[i]));
    const __m256d em1 = _mm256_mul_pd(poly, r);  // exp(r) - 1

    // exp(y) = 2^n * (1 + em1)
    const __m128i n32 = _mm256_cvtpd_epi32(nf);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    const __m256d scale = _mm256_castsi256_pd(bits);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d full = _mm256_sub_pd(_mm256_fmadd_pd(scale, em1, scale), one);

    const __m256d is_zero_n = _mm256_cmp_pd(nf, _mm256_setzero_pd(), _CMP_EQ_OQ);
    return _mm256_blendv_pd(full, em1, is_zero_n);
}

void tanh_inplace(double* x, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d two = _mm256_set1_pd(2.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d sign = _mm256_and_pd(v, sign_mask);
        const __m256d a = _mm256_min_pd(_mm256_andnot_pd(sign_mask, v), _mm256_set1_pd(40.0));
        // tanh(a) = -expm1(-2a) / (2 + expm1(-2a))
        const __m256d e = expm1_nonpos(_mm256_mul_pd(a, _mm256_set1_pd(-2.0)));
        const __m256d t = _mm256_div_pd(_mm256_xor_pd(e, sign_mask), _mm256_add_pd(two, e));
        _mm256_storeu_pd(x + i, _mm256_or_pd(t, sign));
    }
    for (; i < n; ++i) x[i] = std::tanh(x[i]);
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, _mm256_add_pd(a0, a1));
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// Lanes run across references; each lane sums over t in order with separate
// mul and add, reproducing the scalar reference bit for bit.
void sq_dist_to_rows(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                     double* out) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
        __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
        __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
        for (std::size_t t = 0; t < d; ++t) {
            const __m256d qt = _mm256_broadcast_sd(q + t);
            const double* row = refs_t + t * n + j;
            const __m256d d0 = _mm256_sub_pd(qt, _mm256_loadu_pd(row));
            const __m256d d1 = _mm256_sub_pd(qt, _mm256_loadu_pd(row + 4));
            const __m256d d2 = _mm256_sub_pd(qt, _mm256_loadu_pd(row + 8));
            const __m256d d3 = _mm256_sub_pd(qt, _mm256_loadu_pd(row + 12));
            s0 = _mm256_add_pd(s0, _mm256_mul_pd(d0, d0));
            s1 = _mm256_add_pd(s1, _mm256_mul_pd(d1, d1));
            s2 = _mm256_add_pd(s2, _mm256_mul_pd(d2, d2));
            s3 = _mm256_add_pd(s3, _mm256_mul_pd(d3, d3));
        }
        _mm256_storeu_pd(out + j, s0);
        _mm256_storeu_pd(out + j + 4, s1);
        _mm256_storeu_pd(out + j + 8, s2);
        _mm256_storeu_pd(out + j + 12, s3);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d s = _mm256_setzero_pd();
        for (std::size_t t = 0; t < d; ++t) {
            const __m256d diff =
                _mm256_sub_pd(_mm256_broadcast_sd(q + t), _mm256_loadu_pd(refs_t + t * n + j));
            s = _mm256_add_pd(s, _mm256_mul_pd(diff, diff));
        }
        _mm256_storeu_pd(out + j, s);
    }
    for (; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            const double diff = q[t] - refs_t[t * n + j];
            s = s + diff * diff;
        }
        out[j] = s;
    }
}

void dot_to_rows(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                 double* out) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
        __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
        __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
        for (std::size_t t = 0; t < d; ++t) {
            const __m256d qt = _mm256_broadcast_sd(q + t);
            const double* row = refs_t + t * n + j;
            s0 = _mm256_add_pd(s0, _mm256_mul_pd(qt, _mm256_loadu_pd(row)));
            s1 = _mm256_add_pd(s1, _mm256_mul_pd(qt, _mm256_loadu_pd(row + 4)));
            s2 = _mm256_add_pd(s2, _mm256_mul_pd(qt, _mm256_loadu_pd(row + 8)));
            s3 = _mm256_add_pd(s3, _mm256_mul_pd(qt, _mm256_loadu_pd(row + 12)));
        }
        _mm256_storeu_pd(out + j, s0);
        _mm256_storeu_pd(out + j + 4, s1);
        _mm256_storeu_pd(out + j + 8, s2);
        _mm256_storeu_pd(out + j + 12, s3);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d s = _mm256_setzero_pd();
        for (std::size_t t = 0; t < d; ++t)
            s = _mm256_add_pd(
                s, _mm256_mul_pd(_mm256_broadcast_sd(q + t), _mm256_loadu_pd(refs_t + t * n + j)));
        _mm256_storeu_pd(out + j, s);
    }
    for (; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s = s + q[t] * refs_t[t * n + j];
        out[j] = s;
    }
}

void adam_step(double* w, double* m, double* v, const double* g, std::size_t n, double lr_t,
               double beta1, double beta2, double eps) {
    const __m256d b1 = _mm256_set1_pd(beta1), c1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d b2 = _mm256_set1_pd(beta2), c2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lr = _mm256_set1_pd(lr_t), ev = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(c1, gi));
        const __m256d vi = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i),
                                           _mm256_mul_pd(c2, _mm256_mul_pd(gi, gi)));
        const __m256d step =
            _mm256_div_pd(_mm256_mul_pd(lr, mi), _mm256_add_pd(_mm256_sqrt_pd(vi), ev));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
    }
}

}  // namespace avx2

const KernelTable& avx2_kernels() noexcept {
    static const KernelTable table{SimdLevel::Avx2,
                                   avx2::gemm_acc,
                                   avx2::transpose,
                                   avx2::tanh_inplace,
                                   avx2::dot,
                                   avx2::axpy,
                                   avx2::sq_dist_to_rows,
                                   avx2::dot_to_rows,
                                   avx2::adam_step};
    return table;
}

}  // namespace shiftuq::kernels
