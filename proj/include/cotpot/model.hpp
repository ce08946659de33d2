#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cotpot/kernels.hpp"

// A small pre-norm decoder-only transformer with learned position embeddings,
// trained in 64-bit floats with a hand-written backward pass.
namespace cotpot::model {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SequenceTooLong : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TraceMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyMask : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 48;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 192;
  int max_seq_len = 288;
  double dropout_rate = 0.0;
  std::uint64_t init_seed = 0;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

// Vector storage that skips value-initialization on resize; buffers that are
// fully overwritten by a kernel should not pay for a serial memset first.
template <class T, class A = std::allocator<T>>
struct default_init_allocator : public A {
  template <class U>
  struct rebind {
    using other = default_init_allocator<
        U, typename std::allocator_traits<A>::template rebind_alloc<U>>;
  };
  using A::A;
  template <class U>
  void construct(U* ptr) noexcept(
      std::is_nothrow_default_constructible<U>::value) {
    ::new (static_cast<void*>(ptr)) U;
  }
  template <class U, class... Args>
  void construct(U* ptr, Args&&... args) {
    std::allocator_traits<A>::construct(static_cast<A&>(*this), ptr,
                                        std::forward<Args>(args)...);
  }
};

using DoubleBuffer = std::vector<double, default_init_allocator<double>>;

struct Tensor {
  int rows = 0, cols = 0;
  DoubleBuffer v;

  Tensor() = default;
  // Zero-initialized (accumulator semantics).
  Tensor(int r, int c) : rows(r), cols(c) {
    v.resize(static_cast<std::size_t>(r) * c);
    std::fill(v.begin(), v.end(), 0.0);
  }
  // Uninitialized contents; caller must overwrite every element.
  static Tensor uninit(int r, int c) {
    Tensor t;
    t.rows = r;
    t.cols = c;
    t.v.resize(static_cast<std::size_t>(r) * c);
    return t;
  }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return v.size(); }
};

struct LayerParams {
  Tensor ln1_gain, ln1_bias;            // 1 x d
  Tensor wq, wk, wv, wo;                // d x d
  Tensor ln2_gain, ln2_bias;            // 1 x d
  Tensor w_ff1, b_ff1, w_ff2, b_ff2;    // d x dff, 1 x dff, dff x d, 1 x d
};

struct Parameters {
  ModelConfig config;
  Tensor tok_emb;  // vocab x d
  Tensor pos_emb;  // max_seq_len x d
  std::vector<LayerParams> layers;
  Tensor lnf_gain, lnf_bias;  // 1 x d
  Tensor head;                // d x vocab

  // Visits every tensor in declared order (the checkpoint/optimizer order).
  template <class F>
  void visit(F&& f) {
    f("tok_emb", tok_emb);
    f("pos_emb", pos_emb);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto tag = [&](const char* name) {
        return "layer" + std::to_string(l) + "." + name;
      };
      LayerParams& lp = layers[l];
      f(tag("ln1_gain"), lp.ln1_gain);
      f(tag("ln1_bias"), lp.ln1_bias);
      f(tag("wq"), lp.wq);
      f(tag("wk"), lp.wk);
      f(tag("wv"), lp.wv);
      f(tag("wo"), lp.wo);
      f(tag("ln2_gain"), lp.ln2_gain);
      f(tag("ln2_bias"), lp.ln2_bias);
      f(tag("w_ff1"), lp.w_ff1);
      f(tag("b_ff1"), lp.b_ff1);
      f(tag("w_ff2"), lp.w_ff2);
      f(tag("b_ff2"), lp.b_ff2);
    }
    f("lnf_gain", lnf_gain);
    f("lnf_bias", lnf_bias);
    f("head", head);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<Parameters*>(this)->visit(
        [&](const std::string& name, Tensor& t) {
          f(name, static_cast<const Tensor&>(t));
        });
  }

  std::size_t param_count() const;
  bool all_finite() const;
};

using Gradients = Parameters;

Parameters init_params(const ModelConfig& config);
Gradients zeros_like(const Parameters& params);

struct Batch {
  int batch = 0;
  int seq = 0;                 // padded length
  std::vector<int> ids;        // batch*seq, padded with pad_id
  std::vector<int> lengths;    // valid prefix length per row
  int pad_id = 0;
  // Differentiates dropout masks across optimizer steps; unused when
  // dropout_rate is 0.
  std::uint64_t dropout_salt = 0;
};

// Activation cache for one forward pass; consumed exactly once by backward.
struct ForwardTrace {
  const Parameters* params = nullptr;
  Batch batch;
  bool consumed = false;

  struct LayerTrace {
    Tensor x_in;            // rows x d
    Tensor ln1_out;
    std::vector<double> ln1_mean, ln1_rstd;
    Tensor q, k, v;         // rows x d
    // batch*heads*seq*seq attention weights; slots beyond each row's causal
    // window are uninitialized and never read.
    DoubleBuffer probs;
    Tensor att_mix;         // rows x d (heads concatenated, before wo)
    Tensor x_mid;           // after attention residual
    Tensor ln2_out;
    std::vector<double> ln2_mean, ln2_rstd;
    Tensor ff_pre;          // rows x dff, before activation
    Tensor ff_act;          // rows x dff
    // Inverted-dropout masks (values 0 or 1/(1-p)); empty when rate is 0.
    Tensor attn_drop, ff_drop;
  };
  std::vector<LayerTrace> layers;
  Tensor x_final;             // input of the final norm
  Tensor lnf_out;
  std::vector<double> lnf_mean, lnf_rstd;
};

// Causal next-token logits, one row per (batch, position), padded positions
// excluded from attention. Pass `trace` to keep activations for backward.
Tensor forward_logits(const Parameters& params, const Batch& batch,
                      ForwardTrace* trace = nullptr);

// Mean masked negative log-likelihood. targets/target_mask are per logit row;
// mask selects the supervised positions. Throws EmptyMask.
double nll_loss(const Tensor& logits, const std::vector<int>& targets,
                const std::vector<std::uint8_t>& target_mask);

struct LossGrad {
  double loss = 0.0;
  Tensor dlogits;
  long supervised = 0;
};
// Loss plus dlogits; `loss_scale` multiplies the gradient (loss linearity).
LossGrad nll_loss_grad(const Tensor& logits, const std::vector<int>& targets,
                       const std::vector<std::uint8_t>& target_mask,
                       double loss_scale = 1.0);

// Reverse pass over the trace; returns gradients for every parameter tensor.
Gradients backward(const Parameters& params, ForwardTrace& trace,
                   const Tensor& dlogits);

// Deterministic greedy continuation; stops after emitting `eos_id` or after
// max_new_tokens. Ties break toward the lowest token id. Uses an incremental
// key/value cache that reproduces forward_logits bit-for-bit.
std::vector<int> greedy_decode(const Parameters& params,
                               const std::vector<int>& prompt,
                               int max_new_tokens, int eos_id);

}  // namespace cotpot::model
