#pragma once

#include <cstdint>

namespace humid::kernels {

// Serial reference kernels. Kept as the ground truth the parallel
// versions are tested against.
namespace serial {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);
void depthwise_causal_conv1d(const double* x, const double* w, double* y,
                             int d, int len, int taps, int dilation);
}  // namespace serial

// OpenMP kernels. Each output element is written by exactly one thread,
// so results are bit-identical to the serial reference.
namespace omp {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);
void depthwise_causal_conv1d(const double* x, const double* w, double* y,
                             int d, int len, int taps, int dilation);
}  // namespace omp

// Dispatch: OpenMP above a small-size cutoff, serial below it.
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);
void depthwise_causal_conv1d(const double* x, const double* w, double* y,
                             int d, int len, int taps, int dilation);

}  // namespace humid::kernels
