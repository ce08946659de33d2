#include <cmath>
#include <cstring>

#include "cotpot/kernels.hpp"

// Straightforward reference loops. The OpenMP kernels must reproduce these
// bit-for-bit, so every sum here runs over its index in ascending order.
namespace cotpot::kernels::serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
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
  matmul(a, b, c, m, k, n);
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] += bias[j];
  }
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k,
                 int n) {
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
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(k) * n);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      double* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_inplace(double* x, const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] += y[i];
}

void scale_inplace(double* x, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

void gelu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    y[i] = 0.5 * v * (1.0 + t);
  }
}

void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    double u = kGeluC * (v + kGeluA * v * v * v);
    double t = std::tanh(u);
    double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    double g = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
    dx[i] = dy[i] * g;
  }
}

void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int rows, int dim,
               double eps) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<std::size_t>(r) * dim;
    double* yr = y + static_cast<std::size_t>(r) * dim;
    double mu = 0.0;
    for (int c = 0; c < dim; ++c) mu += xr[c];
    mu /= dim;
    double var = 0.0;
    for (int c = 0; c < dim; ++c) {
      double d = xr[c] - mu;
      var += d * d;
    }
    var /= dim;
    double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (int c = 0; c < dim; ++c) {
      yr[c] = (xr[c] - mu) * rs * gain[c] + bias[c];
    }
  }
}

void layernorm_grad(const double* x, const double* gain, const double* mean,
                    const double* rstd, const double* dy, double* dx,
                    double* dgain, double* dbias, int rows, int dim) {
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
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) {
      acc += x[static_cast<std::size_t>(i) * cols + j];
    }
    out[j] += acc;
  }
}

}  // namespace cotpot::kernels::serial
