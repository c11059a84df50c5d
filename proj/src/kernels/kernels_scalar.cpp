#include <cmath>

#include "shiftuq/kernels.hpp"

namespace shiftuq::kernels {
namespace scalar {

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
              double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void transpose(std::size_t r, std::size_t c, const double* src, double* dst) {
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
}

void tanh_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sq_dist_to_rows(const double* q, const double* refs_t, std::size_t d, std::size_t n,
                     double* out) {
    for (std::size_t j = 0; j < n; ++j) {
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
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s = s + q[t] * refs_t[t * n + j];
        out[j] = s;
    }
}

void adam_step(double* w, double* m, double* v, const double* g, std::size_t n, double lr_t,
               double beta1, double beta2, double eps) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
    }
}

}  // namespace scalar

const KernelTable& scalar_table() noexcept {
    static const KernelTable table{SimdLevel::Scalar,
                                   scalar::gemm_acc,
                                   scalar::transpose,
                                   scalar::tanh_inplace,
                                   scalar::dot,
                                   scalar::axpy,
                                   scalar::sq_dist_to_rows,
                                   scalar::dot_to_rows,
                                   scalar::adam_step};
    return table;
}

}  // namespace shiftuq::kernels
