// Times the serial reference kernels against the OpenMP ones on
// training-shaped workloads and cross-checks that both produce identical
// bits. Build with Release flags for meaningful numbers.

#include <chrono>
#include <malloc.h>
#include <cstdio>
#include <cstring>
#include <vector>

#include "cotpot/curriculum.hpp"
#include "cotpot/kernels.hpp"
#include "cotpot/model.hpp"
#include "cotpot/rng.hpp"

using namespace cotpot;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
  return v;
}

template <class F>
double time_backend(kernels::Backend backend, int reps, F&& f) {
  kernels::set_backend(backend);
  f();  // warm up
  auto start = Clock::now();
  for (int r = 0; r < reps; ++r) f();
  return ms_since(start) / reps;
}

void report(const char* name, double serial_ms, double omp_ms, bool same) {
  std::printf("%-22s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %s\n",
              name, serial_ms, omp_ms, serial_ms / omp_ms,
              same ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);

  Rng rng(20240601);

  // Matmul at the logits shape of a training step.
  {
    const int m = 4096, k = 64, n = 192;
    auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<double> c_serial(static_cast<std::size_t>(m) * n);
    std::vector<double> c_omp(c_serial.size());
    double t_serial = time_backend(kernels::Backend::Serial, 5, [&] {
      kernels::matmul(a.data(), b.data(), c_serial.data(), m, k, n);
    });
    double t_omp = time_backend(kernels::Backend::OpenMP, 5, [&] {
      kernels::matmul(a.data(), b.data(), c_omp.data(), m, k, n);
    });
    report("matmul 4096x64x192", t_serial, t_omp,
           std::memcmp(c_serial.data(), c_omp.data(),
                       c_serial.size() * sizeof(double)) == 0);
  }

  // Transposed-weight matmul (the backward shapes).
  {
    const int m = 4096, k = 192, n = 64;
    auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(n) * k, rng);
    std::vector<double> c_serial(static_cast<std::size_t>(m) * n);
    std::vector<double> c_omp(c_serial.size());
    double t_serial = time_backend(kernels::Backend::Serial, 5, [&] {
      kernels::matmul_a_bt(a.data(), b.data(), c_serial.data(), m, k, n);
    });
    double t_omp = time_backend(kernels::Backend::OpenMP, 5, [&] {
      kernels::matmul_a_bt(a.data(), b.data(), c_omp.data(), m, k, n);
    });
    report("matmul_a_bt", t_serial, t_omp,
           std::memcmp(c_serial.data(), c_omp.data(),
                       c_serial.size() * sizeof(double)) == 0);
  }

  // Row-wise normalization over a batch of activations.
  {
    const int rows = 8192, dim = 64;
    auto x = random_vec(static_cast<std::size_t>(rows) * dim, rng);
    auto gain = random_vec(static_cast<std::size_t>(dim), rng);
    auto bias = random_vec(static_cast<std::size_t>(dim), rng);
    std::vector<double> y_serial(x.size()), y_omp(x.size());
    std::vector<double> mean(static_cast<std::size_t>(rows));
    std::vector<double> rstd(static_cast<std::size_t>(rows));
    double t_serial = time_backend(kernels::Backend::Serial, 10, [&] {
      kernels::layernorm(x.data(), gain.data(), bias.data(), y_serial.data(),
                         mean.data(), rstd.data(), rows, dim, 1e-5);
    });
    double t_omp = time_backend(kernels::Backend::OpenMP, 10, [&] {
      kernels::layernorm(x.data(), gain.data(), bias.data(), y_omp.data(),
                         mean.data(), rstd.data(), rows, dim, 1e-5);
    });
    report("layernorm 8192x64", t_serial, t_omp,
           std::memcmp(y_serial.data(), y_omp.data(),
                       y_serial.size() * sizeof(double)) == 0);
  }

  // One full forward+backward on a training-sized batch.
  {
    model::ModelConfig cfg;
    cfg.vocab_size = 160;
    cfg.d_model = 48;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 192;
    cfg.max_seq_len = 160;
    cfg.init_seed = 7;
    model::Parameters params = model::init_params(cfg);
    model::Batch batch;
    batch.batch = 16;
    batch.seq = 128;
    batch.ids.resize(static_cast<std::size_t>(batch.batch) * batch.seq);
    for (auto& id : batch.ids) {
      id = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size)));
    }
    batch.lengths.assign(static_cast<std::size_t>(batch.batch), batch.seq);
    std::vector<int> targets(batch.ids.size());
    std::vector<std::uint8_t> mask(batch.ids.size(), 1);
    for (std::size_t i = 0; i + 1 < batch.ids.size(); ++i) {
      targets[i] = batch.ids[i + 1];
    }

    auto run_step = [&] {
      model::ForwardTrace trace;
      model::Tensor logits = model::forward_logits(params, batch, &trace);
      model::LossGrad lg = model::nll_loss_grad(logits, targets, mask);
      model::Gradients grads = model::backward(params, trace, lg.dlogits);
      return grads.tok_emb.v[0];
    };
    double probe_serial = 0.0, probe_omp = 0.0;
    double t_serial = time_backend(kernels::Backend::Serial, 3,
                                   [&] { probe_serial = run_step(); });
    double t_omp =
        time_backend(kernels::Backend::OpenMP, 3, [&] { probe_omp = run_step(); });
    report("train step fwd+bwd", t_serial, t_omp,
           std::memcmp(&probe_serial, &probe_omp, sizeof(double)) == 0);
  }

  kernels::set_backend(kernels::Backend::OpenMP);
  return 0;
}
