#include <cmath>
#include <cstring>

#include "cotpot/kernels.hpp"

// OpenMP kernels. Work is split across independent output rows or columns;
// the reduction order inside each output element matches the serial kernels
// exactly, which keeps results identical for any thread count.
namespace cotpot::kernels::omp {

namespace {
// Tiny problems are not worth a thread team; the serial path computes the
// same bits.
constexpr long kParallelCutoff = 16 * 1024;
}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  if (static_cast<long>(m) * k * n < kParallelCutoff) {
    serial::matmul(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    std::memset(crow, 0, sizeof(double) * static_cast<std::size_t>(n));
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_bias(const double* a, const double* b, const double* bias,
                 double* c, int m, int k, int n) {
  if (static_cast<long>(m) * k * n < kParallelCutoff) {
    serial::matmul_bias(a, b, bias, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    std::memset(crow, 0, sizeof(double) * static_cast<std::size_t>(n));
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
    for (int j = 0; j < n; ++j) crow[j] += bias[j];
  }
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  if (static_cast<long>(m) * k * n < kParallelCutoff) {
    serial::matmul_a_bt(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

void matmul_at_b(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  if (static_cast<long>(m) * k * n < kParallelCutoff) {
    serial::matmul_at_b(a, b, c, m, k, n);
    return;
  }
  // Parallel over output rows (columns of A); the i-sum stays ascending.
#pragma omp parallel for schedule(static)
  for (int p = 0; p < k; ++p) {
    double* crow = c + static_cast<std::size_t>(p) * n;
    std::memset(crow, 0, sizeof(double) * static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) {
      double av = a[static_cast<std::size_t>(i) * k + p];
      const double* brow = b + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_inplace(double* x, const double* y, std::size_t n) {
  if (n < static_cast<std::size_t>(kParallelCutoff)) {
    serial::add_inplace(x, y, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) x[i] += y[i];
}

void scale_inplace(double* x, double s, std::size_t n) {
  if (n < static_cast<std::size_t>(kParallelCutoff)) {
    serial::scale_inplace(x, s, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) x[i] *= s;
}

void gelu(const double* x, double* y, std::size_t n) {
  if (n < 4096) {
    serial::gelu(x, y, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    double v = x[i];
    double t = std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v));
    y[i] = 0.5 * v * (1.0 + t);
  }
}

void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  if (n < 4096) {
    serial::gelu_grad(x, dy, dx, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    double v = x[i];
    double u = 0.7978845608028654 * (v + 0.044715 * v * v * v);
    double t = std::tanh(u);
    double du = 0.7978845608028654 * (1.0 + 3.0 * 0.044715 * v * v);
    dx[i] = dy[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
  }
}

void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int rows, int dim,
               double eps) {
  if (static_cast<long>(rows) * dim < kParallelCutoff) {
    serial::layernorm(x, gain, bias, y, mean, rstd, rows, dim, eps);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    serial::layernorm(x + static_cast<std::size_t>(r) * dim, gain, bias,
                      y + static_cast<std::size_t>(r) * dim, mean + r,
                      rstd + r, 1, dim, eps);
  }
}

void layernorm_grad(const double* x, const double* gain, const double* mean,
                    const double* rstd, const double* dy, double* dx,
                    double* dgain, double* dbias, int rows, int dim) {
  if (static_cast<long>(rows) * dim < kParallelCutoff) {
    serial::layernorm_grad(x, gain, mean, rstd, dy, dx, dgain, dbias, rows,
                           dim);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<std::size_t>(r) * dim;
    const double* dyr = dy + static_cast<std::size_t>(r) * dim;
    double* dxr = dx + static_cast<std::size_t>(r) * dim;
    double mu = mean[r], rs = rstd[r];
    double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
    for (int c = 0; c < dim; ++c) {
      double xhat = (xr[c] - mu) * rs;
      double dyg = dyr[c] * gain[c];
      sum_dyg += dyg;
      sum_dyg_xhat += dyg * xhat;
    }
    double inv_dim = 1.0 / dim;
    for (int c = 0; c < dim; ++c) {
      double xhat = (xr[c] - mu) * rs;
      double dyg = dyr[c] * gain[c];
      dxr[c] = rs * (dyg - inv_dim * sum_dyg - xhat * inv_dim * sum_dyg_xhat);
    }
  }
  // Parameter grads reduce over rows; parallel across columns.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < dim; ++c) {
    double dg = 0.0, db = 0.0;
    for (int r = 0; r < rows; ++r) {
      double xhat =
          (x[static_cast<std::size_t>(r) * dim + c] - mean[r]) * rstd[r];
      double d = dy[static_cast<std::size_t>(r) * dim + c];
      dg += d * xhat;
      db += d;
    }
    dgain[c] += dg;
    dbias[c] += db;
  }
}

void col_sums_accum(const double* x, double* out, int rows, int cols) {
  if (static_cast<long>(rows) * cols < kParallelCutoff) {
    serial::col_sums_accum(x, out, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) {
      acc += x[static_cast<std::size_t>(i) * cols + j];
    }
    out[j] += acc;
  }
}

}  // namespace cotpot::kernels::omp
