#include "cpmoe/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cpmoe::kern {

namespace {
int g_threads = 0;  // 0 = hardware default
}

int threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
    g_threads = n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

// Row i of C accumulates rank-1 updates in ascending k; identical order in
// both forms.
static inline void mm_row(const double* A, const double* B, double* C, int64_t i, int64_t K, int64_t N, bool accum) {
    double* c = C + i * N;
    if (!accum) std::memset(c, 0, sizeof(double) * N);
    const double* a = A + i * K;
    for (int64_t k = 0; k < K; ++k) {
        double av = a[k];
        const double* b = B + k * N;
        for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
}

void matmul_serial(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
    for (int64_t i = 0; i < M; ++i) mm_row(A, B, C, i, K, N, accum);
}

void matmul_omp(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < M; ++i) mm_row(A, B, C, i, K, N, accum);
#else
    matmul_serial(A, B, C, M, K, N, accum);
#endif
}

void matmul(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
    if (threads() > 1 && M > 1)
        matmul_omp(A, B, C, M, K, N, accum);
    else
        matmul_serial(A, B, C, M, K, N, accum);
}

static inline void abt_row(const double* A, const double* B, double* C, int64_t i, int64_t K, int64_t N, bool accum) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (int64_t j = 0; j < N; ++j) {
        const double* b = B + j * K;
        double s = 0.0;
        for (int64_t k = 0; k < K; ++k) s += a[k] * b[k];
        c[j] = accum ? c[j] + s : s;
    }
}

void matmul_abt_serial(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
    for (int64_t i = 0; i < M; ++i) abt_row(A, B, C, i, K, N, accum);
}

void matmul_abt_omp(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < M; ++i) abt_row(A, B, C, i, K, N, accum);
#else
    matmul_abt_serial(A, B, C, M, K, N, accum);
#endif
}

void matmul_abt(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
    if (threads() > 1 && M > 1)
        matmul_abt_omp(A, B, C, M, K, N, accum);
    else
        matmul_abt_serial(A, B, C, M, K, N, accum);
}

// Row k of C = sum over m of A[m][k] * B[m]; ascending m in both forms.
static inline void atb_row(const double* A, const double* B, double* C, int64_t k, int64_t M, int64_t K, int64_t N, bool accum) {
    double* c = C + k * N;
    if (!accum) std::memset(c, 0, sizeof(double) * N);
    for (int64_t m = 0; m < M; ++m) {
        double av = A[m * K + k];
        const double* b = B + m * N;
        for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
}

void matmul_atb_serial(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
    for (int64_t k = 0; k < K; ++k) atb_row(A, B, C, k, M, K, N, accum);
}

void matmul_atb_omp(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int64_t k = 0; k < K; ++k) atb_row(A, B, C, k, M, K, N, accum);
#else
    matmul_atb_serial(A, B, C, M, K, N, accum);
#endif
}

void matmul_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum) {
    if (threads() > 1 && K > 1)
        matmul_atb_omp(A, B, C, M, K, N, accum);
    else
        matmul_atb_serial(A, B, C, M, K, N, accum);
}

}  // namespace cpmoe::kern
