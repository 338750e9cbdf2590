// Compares the serial reference kernels against the OpenMP versions and
// verifies bit-identical results at every size.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include <omp.h>

#include "humid/kernels.hpp"

using Clock = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = static_cast<double>(rng() >> 11) / 9007199254740992.0 - 0.5;
    return v;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

bool bench_matmul(std::mt19937_64& rng, int m, int k, int n) {
    const auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
    const auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
    std::vector<double> cs(static_cast<std::size_t>(m) * n), cp(cs.size());
    const double ts = time_best_of(3, [&] {
        humid::kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
    });
    const double tp = time_best_of(3, [&] {
        humid::kernels::omp::matmul(a.data(), b.data(), cp.data(), m, k, n);
    });
    const bool identical =
        std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(double)) == 0;
    std::printf("matmul %4dx%4dx%4d   serial %9.3f ms   omp %9.3f ms   x%5.2f   %s\n",
                m, k, n, ts * 1e3, tp * 1e3, ts / tp,
                identical ? "bit-identical" : "MISMATCH");
    return identical;
}

bool bench_conv(std::mt19937_64& rng, int d, int len, int taps, int dilation) {
    const auto x = random_vec(rng, static_cast<std::size_t>(d) * len);
    const auto w = random_vec(rng, static_cast<std::size_t>(d) * taps);
    std::vector<double> ys(static_cast<std::size_t>(d) * len), yp(ys.size());
    const double ts = time_best_of(3, [&] {
        humid::kernels::serial::depthwise_causal_conv1d(x.data(), w.data(), ys.data(), d,
                                                        len, taps, dilation);
    });
    const double tp = time_best_of(3, [&] {
        humid::kernels::omp::depthwise_causal_conv1d(x.data(), w.data(), yp.data(), d,
                                                     len, taps, dilation);
    });
    const bool identical =
        std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(double)) == 0;
    std::printf("conv d=%4d L=%5d K=%2d dil=%d   serial %9.3f ms   omp %9.3f ms   x%5.2f   %s\n",
                d, len, taps, dilation, ts * 1e3, tp * 1e3, ts / tp,
                identical ? "bit-identical" : "MISMATCH");
    return identical;
}

}  // namespace

int main() {
    std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
    std::mt19937_64 rng(1);
    bool ok = true;
    for (int s : {32, 128, 256, 512})
        ok = bench_matmul(rng, s, s, s) && ok;
    ok = bench_matmul(rng, 300, 64, 64) && ok;
    for (int len : {300, 4096})
        for (int d : {64, 256})
            ok = bench_conv(rng, d, len, 10, 2) && ok;
    std::printf("\n%s\n", ok ? "all kernels bit-identical" : "MISMATCH DETECTED");
    return ok ? 0 : 1;
}
