#pragma once

#include <cstdint>

namespace cpmoe::kern {

// Matrix kernels. Each comes in a serial reference form and an OpenMP form
// that parallelizes over independent output rows while keeping the exact
// per-element accumulation order of the serial form, so results are bitwise
// identical at any thread count. The unsuffixed entry points dispatch on the
// configured thread count.

int threads();
void set_threads(int n);  // n < 1 selects the hardware default

// C[M,N] = (accum ? C : 0) + A[M,K] * B[K,N]
void matmul_serial(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum);
void matmul_omp(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum);
void matmul(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum = false);

// C[M,N] = (accum ? C : 0) + A[M,K] * B[N,K]^T
void matmul_abt_serial(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum);
void matmul_abt_omp(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum);
void matmul_abt(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum = false);

// C[K,N] = (accum ? C : 0) + A[M,K]^T * B[M,N]
void matmul_atb_serial(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum);
void matmul_atb_omp(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum);
void matmul_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N, bool accum = false);

// Elementwise helper: f(i) for i in [0, n), independent iterations.
template <class F>
void par_for(int64_t n, F f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) f(i);
#else
    for (int64_t i = 0; i < n; ++i) f(i);
#endif
}

}  // namespace cpmoe::kern
