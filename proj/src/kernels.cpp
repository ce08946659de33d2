#include "cotpot/kernels.hpp"

namespace cotpot::kernels {

namespace {
Backend g_backend = Backend::OpenMP;
}

Backend active_backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

#define COTPOT_DISPATCH(fn, ...)            \
  do {                                      \
    if (g_backend == Backend::Serial) {     \
      serial::fn(__VA_ARGS__);              \
    } else {                                \
      omp::fn(__VA_ARGS__);                 \
    }                                       \
  } while (0)

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  COTPOT_DISPATCH(matmul, a, b, c, m, k, n);
}
void matmul_bias(const double* a, const double* b, const double* bias,
                 double* c, int m, int k, int n) {
  COTPOT_DISPATCH(matmul_bias, a, b, bias, c, m, k, n);
}
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  COTPOT_DISPATCH(matmul_a_bt, a, b, c, m, k, n);
}
void matmul_at_b(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  COTPOT_DISPATCH(matmul_at_b, a, b, c, m, k, n);
}
void add_inplace(double* x, const double* y, std::size_t n) {
  COTPOT_DISPATCH(add_inplace, x, y, n);
}
void scale_inplace(double* x, double s, std::size_t n) {
  COTPOT_DISPATCH(scale_inplace, x, s, n);
}
void gelu(const double* x, double* y, std::size_t n) {
  COTPOT_DISPATCH(gelu, x, y, n);
}
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  COTPOT_DISPATCH(gelu_grad, x, dy, dx, n);
}
void layernorm(const double* x, const double* gain, const double* bias,
               double* y, double* mean, double* rstd, int rows, int dim,
               double eps) {
  COTPOT_DISPATCH(layernorm, x, gain, bias, y, mean, rstd, rows, dim, eps);
}
void layernorm_grad(const double* x, const double* gain, const double* mean,
                    const double* rstd, const double* dy, double* dx,
                    double* dgain, double* dbias, int rows, int dim) {
  COTPOT_DISPATCH(layernorm_grad, x, gain, mean, rstd, dy, dx, dgain, dbias,
                  rows, dim);
}
void col_sums_accum(const double* x, double* out, int rows, int cols) {
  COTPOT_DISPATCH(col_sums_accum, x, out, rows, cols);
}

#undef COTPOT_DISPATCH

}  // namespace cotpot::kernels
