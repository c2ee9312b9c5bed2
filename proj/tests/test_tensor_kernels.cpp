#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "cpmoe/kernels.hpp"
#include "cpmoe/rng.hpp"
#include "cpmoe/tensor.hpp"
#include "doctest.h"

using namespace cpmoe;

namespace {

std::vector<double> random_vec(size_t n, uint64_t key) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = 2.0 * rng_uniform(key, i) - 1.0;
    return v;
}

// Independent oracle: plain ijk triple loop.
std::vector<double> naive_mm(const std::vector<double>& A, const std::vector<double>& B, int M, int K, int N) {
    std::vector<double> C(static_cast<size_t>(M) * N, 0.0);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += A[i * K + k] * B[k * N + j];
            C[i * N + j] = s;
        }
    return C;
}

}  // namespace

TEST_CASE("tensor shape and indexing") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at2(1, 2) == 6.0);
    CHECK(t.all_finite());
    t.at2(0, 0) = std::nan("");
    CHECK(!t.all_finite());
    CHECK_THROWS(Tensor::zeros({2, 0}));
    CHECK_THROWS(t.reshaped({4, 2}));
    Tensor r = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}).reshaped({3, 2});
    CHECK(r.at2(2, 1) == 6.0);
}

TEST_CASE("counter rng is reproducible and order independent") {
    CHECK(rng_u64(7, 3) == rng_u64(7, 3));
    CHECK(rng_u64(7, 3) != rng_u64(7, 4));
    CHECK(rng_u64(7, 3) != rng_u64(8, 3));
    double u = rng_uniform(42, 0);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    // Moments of the normal draw over a large sample.
    double s = 0.0, s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double z = rng_normal(9, static_cast<uint64_t>(i));
        s += z;
        s2 += z * z;
    }
    CHECK(std::fabs(s / n) < 0.02);
    CHECK(std::fabs(s2 / n - 1.0) < 0.03);
}

TEST_CASE("matmul kernels match the naive oracle") {
    for (auto [M, K, N] : {std::tuple{3, 4, 5}, std::tuple{1, 7, 2}, std::tuple{16, 16, 16}}) {
        auto A = random_vec(static_cast<size_t>(M) * K, 11);
        auto B = random_vec(static_cast<size_t>(K) * N, 12);
        auto want = naive_mm(A, B, M, K, N);
        std::vector<double> got(static_cast<size_t>(M) * N);
        kern::matmul_serial(A.data(), B.data(), got.data(), M, K, N, false);
        for (size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("transposed kernels match compositions of the oracle") {
    const int M = 5, K = 3, N = 4;
    auto A = random_vec(M * K, 21);
    auto Bt = random_vec(N * K, 22);  // B^T stored as [N,K]
    // A * B where B[k][n] = Bt[n][k]
    std::vector<double> B(K * N);
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) B[k * N + n] = Bt[n * K + k];
    auto want = naive_mm(A, B, M, K, N);
    std::vector<double> got(M * N);
    kern::matmul_abt_serial(A.data(), Bt.data(), got.data(), M, K, N, false);
    for (size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    // A^T * C with A [M,K], C [M,N]
    auto C = random_vec(M * N, 23);
    std::vector<double> At(K * M);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) At[k * M + m] = A[m * K + k];
    auto want2 = naive_mm(At, C, K, M, N);
    std::vector<double> got2(K * N);
    kern::matmul_atb_serial(A.data(), C.data(), got2.data(), M, K, N, false);
    for (size_t i = 0; i < want2.size(); ++i) CHECK(got2[i] == doctest::Approx(want2[i]).epsilon(1e-12));
}

TEST_CASE("openmp kernels are bitwise identical to serial at any thread count") {
    const int M = 37, K = 29, N = 31;
    auto A = random_vec(static_cast<size_t>(M) * K, 31);
    auto B = random_vec(static_cast<size_t>(K) * N, 32);
    std::vector<double> cs(static_cast<size_t>(M) * N), co(cs.size());
    for (int threads : {1, 2, 4}) {
        kern::set_threads(threads);
        kern::matmul_serial(A.data(), B.data(), cs.data(), M, K, N, false);
        kern::matmul_omp(A.data(), B.data(), co.data(), M, K, N, false);
        CHECK(std::memcmp(cs.data(), co.data(), cs.size() * sizeof(double)) == 0);

        auto Bt = random_vec(static_cast<size_t>(N) * K, 33);
        std::vector<double> ds(static_cast<size_t>(M) * N), dso(ds.size());
        kern::matmul_abt_serial(A.data(), Bt.data(), ds.data(), M, K, N, false);
        kern::matmul_abt_omp(A.data(), Bt.data(), dso.data(), M, K, N, false);
        CHECK(std::memcmp(ds.data(), dso.data(), ds.size() * sizeof(double)) == 0);

        auto C = random_vec(static_cast<size_t>(M) * N, 34);
        std::vector<double> es(static_cast<size_t>(K) * N), eso(es.size());
        kern::matmul_atb_serial(A.data(), C.data(), es.data(), M, K, N, false);
        kern::matmul_atb_omp(A.data(), C.data(), eso.data(), M, K, N, false);
        CHECK(std::memcmp(es.data(), eso.data(), es.size() * sizeof(double)) == 0);
    }
    kern::set_threads(0);
}

TEST_CASE("accumulating forms add into the output") {
    const int M = 2, K = 2, N = 2;
    std::vector<double> A{1, 2, 3, 4}, B{1, 0, 0, 1};
    std::vector<double> C{10, 10, 10, 10};
    kern::matmul_serial(A.data(), B.data(), C.data(), M, K, N, true);
    CHECK(C[0] == 11.0);
    CHECK(C[3] == 14.0);
}
