// Times the serial reference kernels against the OpenMP dispatch and checks
// that both produce bitwise-identical output. Run with the thread count as
// the only argument (default: hardware).
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "cpmoe/kernels.hpp"
#include "cpmoe/rng.hpp"

using namespace cpmoe;
using clk = std::chrono::steady_clock;

namespace {

using kernel_fn = void (*)(const double*, const double*, double*, int64_t, int64_t, int64_t, bool);

double time_best_of(kernel_fn f, const double* a, const double* b, double* c, int64_t m, int64_t k,
                    int64_t n, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clk::now();
        f(a, b, c, m, k, n, false);
        best = std::min(best, std::chrono::duration<double>(clk::now() - t0).count());
    }
    return best;
}

std::vector<double> random_mat(int64_t rows, int64_t cols, uint64_t key) {
    std::vector<double> v(rows * cols);
    for (int64_t i = 0; i < rows * cols; ++i) v[i] = rng_uniform(key, i) * 2.0 - 1.0;
    return v;
}

struct Case {
    const char* name;
    kernel_fn serial, omp;
};

}  // namespace

int main(int argc, char** argv) {
    int threads = argc > 1 ? std::atoi(argv[1]) : 0;
    kern::set_threads(threads);
    std::printf("threads: %d\n", kern::threads());

    const Case cases[] = {
        {"matmul    ", kern::matmul_serial, kern::matmul_omp},
        {"matmul_abt", kern::matmul_abt_serial, kern::matmul_abt_omp},
        {"matmul_atb", kern::matmul_atb_serial, kern::matmul_atb_omp},
    };
    // Square shapes plus the tall-skinny one the model spends its time in
    // (rows = batch * links * steps, cols = hidden width).
    const int64_t shapes[][3] = {{128, 128, 128}, {384, 384, 384}, {4096, 64, 64}};

    std::printf("%-10s %6s %5s %5s  %10s %10s %8s\n", "kernel", "M", "K", "N", "serial_ms",
                "omp_ms", "speedup");
    bool all_equal = true;
    for (const auto& c : cases) {
        for (const auto& s : shapes) {
            int64_t m = s[0], k = s[1], n = s[2];
            auto a = random_mat(m, k, 11);
            auto b = random_mat(std::max(k, m), std::max(n, k), 17);  // covers every layout
            std::vector<double> c0(m > k ? m * n : k * n, 0.0), c1(c0.size(), 0.0);
            int reps = m * n * k > (int64_t)64e6 ? 3 : 10;
            double ts = time_best_of(c.serial, a.data(), b.data(), c0.data(), m, k, n, reps);
            double tp = time_best_of(c.omp, a.data(), b.data(), c1.data(), m, k, n, reps);
            if (c0 != c1) all_equal = false;
            std::printf("%-10s %6lld %5lld %5lld  %10.3f %10.3f %7.2fx\n", c.name,
                        (long long)m, (long long)k, (long long)n, ts * 1e3, tp * 1e3, ts / tp);
        }
    }
    std::printf("serial/omp outputs bitwise identical: %s\n", all_equal ? "yes" : "NO");
    return all_equal ? 0 : 1;
}
