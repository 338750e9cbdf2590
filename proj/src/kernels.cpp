#include "humid/kernels.hpp"

namespace humid::kernels {

namespace serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::int64_t>(i) * k + p];
            const double* bp = b + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// c[k x n] = a^T[k x m] * b[m x n], a given as [m x k]
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < k; ++i) {
        double* ci = c + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < m; ++p) {
            const double api = a[static_cast<std::int64_t>(p) * k + i];
            const double* bp = b + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

// c[m x k] = a[m x n] * b^T[n x k], b given as [k x n]
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < k; ++j) {
            const double* bj = b + static_cast<std::int64_t>(j) * n;
            double s = 0.0;
            for (int p = 0; p < n; ++p) s += ai[p] * bj[p];
            c[static_cast<std::int64_t>(i) * k + j] = s;
        }
    }
}

void depthwise_causal_conv1d(const double* x, const double* w, double* y,
                             int d, int len, int taps, int dilation) {
    for (int c = 0; c < d; ++c) {
        const double* xc = x + static_cast<std::int64_t>(c) * len;
        const double* wc = w + static_cast<std::int64_t>(c) * taps;
        double* yc = y + static_cast<std::int64_t>(c) * len;
        for (int t = 0; t < len; ++t) {
            double s = 0.0;
            for (int k = 0; k < taps; ++k) {
                const int src = t - k * dilation;
                if (src >= 0) s += wc[k] * xc[src];
            }
            yc[t] = s;
        }
    }
}

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::int64_t>(i) * k + p];
            const double* bp = b + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < k; ++i) {
        double* ci = c + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < m; ++p) {
            const double api = a[static_cast<std::int64_t>(p) * k + i];
            const double* bp = b + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < k; ++j) {
            const double* bj = b + static_cast<std::int64_t>(j) * n;
            double s = 0.0;
            for (int p = 0; p < n; ++p) s += ai[p] * bj[p];
            c[static_cast<std::int64_t>(i) * k + j] = s;
        }
    }
}

void depthwise_causal_conv1d(const double* x, const double* w, double* y,
                             int d, int len, int taps, int dilation) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < d; ++c) {
        const double* xc = x + static_cast<std::int64_t>(c) * len;
        const double* wc = w + static_cast<std::int64_t>(c) * taps;
        double* yc = y + static_cast<std::int64_t>(c) * len;
        for (int t = 0; t < len; ++t) {
            double s = 0.0;
            for (int k = 0; k < taps; ++k) {
                const int src = t - k * dilation;
                if (src >= 0) s += wc[k] * xc[src];
            }
            yc[t] = s;
        }
    }
}

}  // namespace omp

namespace {
// Below this many output elements the omp fork/join overhead dominates.
constexpr std::int64_t kParallelCutoff = 16 * 1024;
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    if (static_cast<std::int64_t>(m) * n * k >= kParallelCutoff)
        omp::matmul(a, b, c, m, k, n);
    else
        serial::matmul(a, b, c, m, k, n);
}

void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
    if (static_cast<std::int64_t>(m) * n * k >= kParallelCutoff)
        omp::matmul_at_b(a, b, c, m, k, n);
    else
        serial::matmul_at_b(a, b, c, m, k, n);
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
    if (static_cast<std::int64_t>(m) * n * k >= kParallelCutoff)
        omp::matmul_a_bt(a, b, c, m, k, n);
    else
        serial::matmul_a_bt(a, b, c, m, k, n);
}

void depthwise_causal_conv1d(const double* x, const double* w, double* y,
                             int d, int len, int taps, int dilation) {
    if (static_cast<std::int64_t>(d) * len * taps >= kParallelCutoff)
        omp::depthwise_causal_conv1d(x, w, y, d, len, taps, dilation);
    else
        serial::depthwise_causal_conv1d(x, w, y, d, len, taps, dilation);
}

}  // namespace humid::kernels
