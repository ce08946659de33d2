#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

// Dense double-precision kernels behind the sequence model. Each kernel has a
// serial reference implementation and an OpenMP one. Both reduce every output
// element in the same fixed order, so results are bit-identical across
// backends and thread counts; tests assert this and the benchmark compares
// their throughput.
namespace cotpot::kernels {

enum class Backend { Serial, OpenMP };

Backend active_backend();
void set_backend(Backend b);

// ---- dispatching entry points ----------------------------------------------
// Matrices are row-major. m/k/n follow C[m x n] = A[m x k] * B[k x n].

void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// C = A * B + bias (bias length n, added after the k-sum)
void matmul_bias(const double* a, const double* b, const double* bias,
                 double* c, int m, int k, int n);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k,
                 int n);
// C[k x n] = A[m x k]^T * B[m x n]
void matmul_at_b(const double* a, const double* b, double* c, int m, int k,
                 int n);
void add_inplace(double* x, const double* y, std::size_t n);
void scale_inplace(double* x, double s, std::size_t n);
void gelu(const double* x, double* y, std::size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n);
// Row-wise layer normalization; mean/rstd have one entry per row.
void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int rows, int dim,
               double eps);
// dgain/dbias are accumulated into (callers zero them first).
void layernorm_grad(const double* x, const double* gain, const double* mean,
                    const double* rstd, const double* dy, double* dx,
                    double* dgain, double* dbias, int rows, int dim);
// out[j] += sum over rows of x[i][j]
void col_sums_accum(const double* x, double* out, int rows, int cols);

namespace serial {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_bias(const double* a, const double* b, const double* bias,
                 double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k,
                 int n);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k,
                 int n);
void add_inplace(double* x, const double* y, std::size_t n);
void scale_inplace(double* x, double s, std::size_t n);
void gelu(const double* x, double* y, std::size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n);
void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int rows, int dim,
               double eps);
void layernorm_grad(const double* x, const double* gain, const double* mean,
                    const double* rstd, const double* dy, double* dx,
                    double* dgain, double* dbias, int rows, int dim);
void col_sums_accum(const double* x, double* out, int rows, int cols);
}  // namespace serial

namespace omp {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_bias(const double* a, const double* b, const double* bias,
                 double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k,
                 int n);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k,
                 int n);
void add_inplace(double* x, const double* y, std::size_t n);
void scale_inplace(double* x, double s, std::size_t n);
void gelu(const double* x, double* y, std::size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n);
void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int rows, int dim,
               double eps);
void layernorm_grad(const double* x, const double* gain, const double* mean,
                    const double* rstd, const double* dy, double* dx,
                    double* dgain, double* dbias, int rows, int dim);
void col_sums_accum(const double* x, double* out, int rows, int cols);
}  // namespace omp

// Loop helper for composed work (attention blocks, per-example decoding).
// Item i must write only its own outputs.
template <class F>
void parallel_for(int n, F&& f) {
  if (active_backend() == Backend::Serial) {
    for (int i = 0; i < n; ++i) f(i);
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) f(i);
  }
}

}  // namespace cotpot::kernels
