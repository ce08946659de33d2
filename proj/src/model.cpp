#include "cotpot/model.hpp"

#include <algorithm>
#include <cmath>

#include "cotpot/rng.hpp"

namespace cotpot::model {

namespace {
constexpr double kLnEps = 1e-5;
}

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (d_model < 1) throw ConfigError("d_model must be positive");
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw ConfigError("d_model must be divisible by n_heads");
  }
  if (n_layers < 1) throw ConfigError("n_layers must be positive");
  if (d_ff < 1) throw ConfigError("d_ff must be positive");
  if (max_seq_len < 2) throw ConfigError("max_seq_len must be >= 2");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
}

std::size_t Parameters::param_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

bool Parameters::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const Tensor& t) {
    for (double x : t.v) {
      if (!std::isfinite(x)) ok = false;
    }
  });
  return ok;
}

namespace {

// Box-Muller on top of the project RNG; the library normal_distribution is
// implementation-defined and would break cross-machine reproducibility.
double draw_normal(Rng& rng) {
  double u1 = 1.0 - rng.uniform();  // (0, 1]
  double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

bool is_norm_gain(const std::string& name) {
  return name.size() >= 4 && name.compare(name.size() - 4, 4, "gain") == 0;
}
bool is_bias(const std::string& name) {
  return (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) ||
         name.find(".b_") != std::string::npos;
}

}  // namespace

Parameters init_params(const ModelConfig& config) {
  config.validate();
  Parameters p;
  p.config = config;
  const int d = config.d_model;
  p.tok_emb = Tensor(config.vocab_size, d);
  p.pos_emb = Tensor(config.max_seq_len, d);
  p.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& lp : p.layers) {
    lp.ln1_gain = Tensor(1, d);
    lp.ln1_bias = Tensor(1, d);
    lp.wq = Tensor(d, d);
    lp.wk = Tensor(d, d);
    lp.wv = Tensor(d, d);
    lp.wo = Tensor(d, d);
    lp.ln2_gain = Tensor(1, d);
    lp.ln2_bias = Tensor(1, d);
    lp.w_ff1 = Tensor(d, config.d_ff);
    lp.b_ff1 = Tensor(1, config.d_ff);
    lp.w_ff2 = Tensor(config.d_ff, d);
    lp.b_ff2 = Tensor(1, d);
  }
  p.lnf_gain = Tensor(1, d);
  p.lnf_bias = Tensor(1, d);
  p.head = Tensor(d, config.vocab_size);

  Rng rng(mix_seed(config.init_seed, "init_params"));
  p.visit([&](const std::string& name, Tensor& t) {
    if (is_norm_gain(name)) {
      std::fill(t.v.begin(), t.v.end(), 1.0);
    } else if (is_bias(name)) {
      std::fill(t.v.begin(), t.v.end(), 0.0);
    } else {
      for (double& x : t.v) x = 0.02 * draw_normal(rng);
    }
  });
  return p;
}

Gradients zeros_like(const Parameters& params) {
  Gradients g;
  g.config = params.config;
  g.tok_emb = Tensor(params.tok_emb.rows, params.tok_emb.cols);
  g.pos_emb = Tensor(params.pos_emb.rows, params.pos_emb.cols);
  g.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& src = params.layers[l];
    LayerParams& dst = g.layers[l];
    auto like = [](const Tensor& t) { return Tensor(t.rows, t.cols); };
    dst.ln1_gain = like(src.ln1_gain);
    dst.ln1_bias = like(src.ln1_bias);
    dst.wq = like(src.wq);
    dst.wk = like(src.wk);
    dst.wv = like(src.wv);
    dst.wo = like(src.wo);
    dst.ln2_gain = like(src.ln2_gain);
    dst.ln2_bias = like(src.ln2_bias);
    dst.w_ff1 = like(src.w_ff1);
    dst.b_ff1 = like(src.b_ff1);
    dst.w_ff2 = like(src.w_ff2);
    dst.b_ff2 = like(src.b_ff2);
  }
  g.lnf_gain = Tensor(params.lnf_gain.rows, params.lnf_gain.cols);
  g.lnf_bias = Tensor(params.lnf_bias.rows, params.lnf_bias.cols);
  g.head = Tensor(params.head.rows, params.head.cols);
  return g;
}

// ---- forward ---------------------------------------------------------------

namespace {

struct AttnShape {
  int batch, seq, heads, head_dim;
};

// Causal masked attention for one layer. probs has batch*heads*seq*seq slots.
// Work splits across batch rows (not heads) so no two tasks touch the same
// cache lines of the row-major outputs.
void attention_forward(const Tensor& q, const Tensor& k, const Tensor& v,
                       const std::vector<int>& lengths, const AttnShape& s,
                       DoubleBuffer& probs, Tensor& att_mix) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
  kernels::parallel_for(s.batch, [&](int b) {
    std::vector<double> scores(static_cast<std::size_t>(s.seq));
    for (int h = 0; h < s.heads; ++h) {
      const int bh = b * s.heads + h;
      const int hc0 = h * s.head_dim;
      for (int t = 0; t < s.seq; ++t) {
        const int row_t = b * s.seq + t;
        const int hi = std::min(t, lengths[static_cast<std::size_t>(b)] - 1);
        double max_score = -1e300;
        for (int u = 0; u <= hi; ++u) {
          const int row_u = b * s.seq + u;
          double acc = 0.0;
          for (int c = 0; c < s.head_dim; ++c) {
            acc += q.at(row_t, hc0 + c) * k.at(row_u, hc0 + c);
          }
          acc *= scale;
          scores[static_cast<std::size_t>(u)] = acc;
          if (acc > max_score) max_score = acc;
        }
        double denom = 0.0;
        for (int u = 0; u <= hi; ++u) {
          double e = std::exp(scores[static_cast<std::size_t>(u)] - max_score);
          scores[static_cast<std::size_t>(u)] = e;
          denom += e;
        }
        double* prow = probs.data() +
                       (static_cast<std::size_t>(bh) * s.seq +
                        static_cast<std::size_t>(t)) *
                           s.seq;
        for (int u = 0; u <= hi; ++u) {
          prow[u] = scores[static_cast<std::size_t>(u)] / denom;
        }
        for (int c = 0; c < s.head_dim; ++c) {
          double acc = 0.0;
          for (int u = 0; u <= hi; ++u) {
            acc += prow[u] * v.at(b * s.seq + u, hc0 + c);
          }
          att_mix.at(row_t, hc0 + c) = acc;
        }
      }
    }
  });
}

void attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                        const std::vector<int>& lengths, const AttnShape& s,
                        const DoubleBuffer& probs, const Tensor& d_att_mix,
                        Tensor& dq, Tensor& dk, Tensor& dv) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
  kernels::parallel_for(s.batch, [&](int b) {
    std::vector<double> dp(static_cast<std::size_t>(s.seq));
    std::vector<double> ds(static_cast<std::size_t>(s.seq));
    for (int h = 0; h < s.heads; ++h) {
      const int bh = b * s.heads + h;
      const int hc0 = h * s.head_dim;
      for (int t = 0; t < s.seq; ++t) {
        const int row_t = b * s.seq + t;
        const int hi = std::min(t, lengths[static_cast<std::size_t>(b)] - 1);
        const double* prow = probs.data() +
                             (static_cast<std::size_t>(bh) * s.seq +
                              static_cast<std::size_t>(t)) *
                                 s.seq;
        double dot = 0.0;
        for (int u = 0; u <= hi; ++u) {
          const int row_u = b * s.seq + u;
          double acc = 0.0;
          for (int c = 0; c < s.head_dim; ++c) {
            acc += d_att_mix.at(row_t, hc0 + c) * v.at(row_u, hc0 + c);
          }
          dp[static_cast<std::size_t>(u)] = acc;
          dot += acc * prow[u];
        }
        for (int u = 0; u <= hi; ++u) {
          ds[static_cast<std::size_t>(u)] =
              prow[u] * (dp[static_cast<std::size_t>(u)] - dot);
        }
        for (int c = 0; c < s.head_dim; ++c) {
          double acc = 0.0;
          for (int u = 0; u <= hi; ++u) {
            acc +=
                ds[static_cast<std::size_t>(u)] * k.at(b * s.seq + u, hc0 + c);
          }
          dq.at(row_t, hc0 + c) = scale * acc;
        }
        for (int u = 0; u <= hi; ++u) {
          const int row_u = b * s.seq + u;
          for (int c = 0; c < s.head_dim; ++c) {
            dk.at(row_u, hc0 + c) +=
                scale * ds[static_cast<std::size_t>(u)] * q.at(row_t, hc0 + c);
            dv.at(row_u, hc0 + c) += prow[u] * d_att_mix.at(row_t, hc0 + c);
          }
        }
      }
    }
  });
}

}  // namespace

Tensor forward_logits(const Parameters& params, const Batch& batch,
                      ForwardTrace* trace) {
  const ModelConfig& cfg = params.config;
  if (batch.seq > cfg.max_seq_len) {
    throw SequenceTooLong("batch length " + std::to_string(batch.seq) +
                          " exceeds max_seq_len " +
                          std::to_string(cfg.max_seq_len));
  }
  const int rows = batch.batch * batch.seq;
  const int d = cfg.d_model;

  Tensor x = Tensor::uninit(rows, d);
  for (int b = 0; b < batch.batch; ++b) {
    for (int t = 0; t < batch.seq; ++t) {
      const int id = batch.ids[static_cast<std::size_t>(b * batch.seq + t)];
      const int row = b * batch.seq + t;
      for (int c = 0; c < d; ++c) {
        x.at(row, c) = params.tok_emb.at(id, c) + params.pos_emb.at(t, c);
      }
    }
  }

  if (trace) {
    trace->params = &params;
    trace->batch = batch;
    trace->consumed = false;
    trace->layers.clear();
    trace->layers.resize(params.layers.size());
  }

  const AttnShape shape{batch.batch, batch.seq, cfg.n_heads,
                        d / cfg.n_heads};
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& lp = params.layers[l];
    Tensor ln1_out = Tensor::uninit(rows, d);
    std::vector<double> ln1_mean(static_cast<std::size_t>(rows));
    std::vector<double> ln1_rstd(static_cast<std::size_t>(rows));
    kernels::layernorm(x.data(), lp.ln1_gain.data(), lp.ln1_bias.data(),
                       ln1_out.data(), ln1_mean.data(), ln1_rstd.data(), rows,
                       d, kLnEps);
    Tensor q = Tensor::uninit(rows, d), k = Tensor::uninit(rows, d),
           v = Tensor::uninit(rows, d);
    kernels::matmul(ln1_out.data(), lp.wq.data(), q.data(), rows, d, d);
    kernels::matmul(ln1_out.data(), lp.wk.data(), k.data(), rows, d, d);
    kernels::matmul(ln1_out.data(), lp.wv.data(), v.data(), rows, d, d);

    DoubleBuffer probs;
    probs.resize(static_cast<std::size_t>(batch.batch) * cfg.n_heads *
                 batch.seq * batch.seq);
    Tensor att_mix = Tensor::uninit(rows, d);
    attention_forward(q, k, v, batch.lengths, shape, probs, att_mix);

    Tensor attn_out = Tensor::uninit(rows, d);
    kernels::matmul(att_mix.data(), lp.wo.data(), attn_out.data(), rows, d, d);

    // Dropout on the residual branches, training passes only.
    Tensor attn_drop, ff_drop;
    const bool dropping = trace && cfg.dropout_rate > 0.0;
    if (dropping) {
      Rng drop_rng(mix_seed(cfg.init_seed,
                            "dropout/" + std::to_string(l) + "/" +
                                std::to_string(batch.dropout_salt)));
      const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);
      attn_drop = Tensor::uninit(rows, d);
      ff_drop = Tensor::uninit(rows, d);
      for (double& m : attn_drop.v) {
        m = drop_rng.bernoulli(cfg.dropout_rate) ? 0.0 : keep_scale;
      }
      for (double& m : ff_drop.v) {
        m = drop_rng.bernoulli(cfg.dropout_rate) ? 0.0 : keep_scale;
      }
      for (std::size_t i = 0; i < attn_out.v.size(); ++i) {
        attn_out.v[i] *= attn_drop.v[i];
      }
    }

    Tensor x_mid = x;
    kernels::add_inplace(x_mid.data(), attn_out.data(), x_mid.size());

    Tensor ln2_out = Tensor::uninit(rows, d);
    std::vector<double> ln2_mean(static_cast<std::size_t>(rows));
    std::vector<double> ln2_rstd(static_cast<std::size_t>(rows));
    kernels::layernorm(x_mid.data(), lp.ln2_gain.data(), lp.ln2_bias.data(),
                       ln2_out.data(), ln2_mean.data(), ln2_rstd.data(), rows,
                       d, kLnEps);
    Tensor ff_pre = Tensor::uninit(rows, cfg.d_ff);
    kernels::matmul_bias(ln2_out.data(), lp.w_ff1.data(), lp.b_ff1.data(),
                         ff_pre.data(), rows, d, cfg.d_ff);
    Tensor ff_act = Tensor::uninit(rows, cfg.d_ff);
    kernels::gelu(ff_pre.data(), ff_act.data(), ff_pre.size());
    Tensor ff_out = Tensor::uninit(rows, d);
    kernels::matmul_bias(ff_act.data(), lp.w_ff2.data(), lp.b_ff2.data(),
                         ff_out.data(), rows, cfg.d_ff, d);
    if (dropping) {
      for (std::size_t i = 0; i < ff_out.v.size(); ++i) {
        ff_out.v[i] *= ff_drop.v[i];
      }
    }

    Tensor x_next = x_mid;
    kernels::add_inplace(x_next.data(), ff_out.data(), x_next.size());

    if (trace) {
      ForwardTrace::LayerTrace& lt = trace->layers[l];
      lt.x_in = std::move(x);
      lt.ln1_out = std::move(ln1_out);
      lt.ln1_mean = std::move(ln1_mean);
      lt.ln1_rstd = std::move(ln1_rstd);
      lt.q = std::move(q);
      lt.k = std::move(k);
      lt.v = std::move(v);
      lt.probs = std::move(probs);
      lt.att_mix = std::move(att_mix);
      lt.x_mid = std::move(x_mid);
      lt.ln2_out = std::move(ln2_out);
      lt.ln2_mean = std::move(ln2_mean);
      lt.ln2_rstd = std::move(ln2_rstd);
      lt.ff_pre = std::move(ff_pre);
      lt.ff_act = std::move(ff_act);
      lt.attn_drop = std::move(attn_drop);
      lt.ff_drop = std::move(ff_drop);
    }
    x = std::move(x_next);
  }

  Tensor lnf_out = Tensor::uninit(rows, d);
  std::vector<double> lnf_mean(static_cast<std::size_t>(rows));
  std::vector<double> lnf_rstd(static_cast<std::size_t>(rows));
  kernels::layernorm(x.data(), params.lnf_gain.data(), params.lnf_bias.data(),
                     lnf_out.data(), lnf_mean.data(), lnf_rstd.data(), rows, d,
                     kLnEps);
  Tensor logits = Tensor::uninit(rows, cfg.vocab_size);
  kernels::matmul(lnf_out.data(), params.head.data(), logits.data(), rows, d,
                  cfg.vocab_size);
  if (trace) {
    trace->x_final = std::move(x);
    trace->lnf_out = std::move(lnf_out);
    trace->lnf_mean = std::move(lnf_mean);
    trace->lnf_rstd = std::move(lnf_rstd);
  }
  return logits;
}

// ---- loss -------------------------------------------------------------------

namespace {

double row_nll(const Tensor& logits, int row, int target) {
  const double* lr = logits.data() + static_cast<std::size_t>(row) * logits.cols;
  double mx = lr[0];
  for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, lr[j]);
  double denom = 0.0;
  for (int j = 0; j < logits.cols; ++j) denom += std::exp(lr[j] - mx);
  return -(lr[target] - mx - std::log(denom));
}

}  // namespace

double nll_loss(const Tensor& logits, const std::vector<int>& targets,
                const std::vector<std::uint8_t>& target_mask) {
  long supervised = 0;
  for (std::uint8_t m : target_mask) supervised += m ? 1 : 0;
  if (supervised == 0) throw EmptyMask("no supervised positions in batch");
  std::vector<double> per_row(static_cast<std::size_t>(logits.rows), 0.0);
  kernels::parallel_for(logits.rows, [&](int r) {
    if (target_mask[static_cast<std::size_t>(r)]) {
      per_row[static_cast<std::size_t>(r)] =
          row_nll(logits, r, targets[static_cast<std::size_t>(r)]);
    }
  });
  double total = 0.0;
  for (double x : per_row) total += x;  // fixed order
  return total / static_cast<double>(supervised);
}

LossGrad nll_loss_grad(const Tensor& logits, const std::vector<int>& targets,
                       const std::vector<std::uint8_t>& target_mask,
                       double loss_scale) {
  long supervised = 0;
  for (std::uint8_t m : target_mask) supervised += m ? 1 : 0;
  if (supervised == 0) throw EmptyMask("no supervised positions in batch");
  LossGrad out;
  out.supervised = supervised;
  out.dlogits = Tensor(logits.rows, logits.cols);
  std::vector<double> per_row(static_cast<std::size_t>(logits.rows), 0.0);
  const double inv = loss_scale / static_cast<double>(supervised);
  kernels::parallel_for(logits.rows, [&](int r) {
    if (!target_mask[static_cast<std::size_t>(r)]) return;
    const double* lr =
        logits.data() + static_cast<std::size_t>(r) * logits.cols;
    double* dr =
        out.dlogits.data() + static_cast<std::size_t>(r) * logits.cols;
    double mx = lr[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, lr[j]);
    double denom = 0.0;
    for (int j = 0; j < logits.cols; ++j) denom += std::exp(lr[j] - mx);
    const int target = targets[static_cast<std::size_t>(r)];
    per_row[static_cast<std::size_t>(r)] =
        -(lr[target] - mx - std::log(denom));
    for (int j = 0; j < logits.cols; ++j) {
      double p = std::exp(lr[j] - mx) / denom;
      dr[j] = inv * (p - (j == target ? 1.0 : 0.0));
    }
  });
  double total = 0.0;
  for (double x : per_row) total += x;
  out.loss = total / static_cast<double>(supervised);
  return out;
}

// ---- backward ----------------------------------------------------------------

Gradients backward(const Parameters& params, ForwardTrace& trace,
                   const Tensor& dlogits) {
  if (trace.params != &params) {
    throw TraceMismatch("trace was produced by different parameters");
  }
  if (trace.consumed) throw TraceMismatch("trace already consumed");
  trace.consumed = true;

  const ModelConfig& cfg = params.config;
  const Batch& batch = trace.batch;
  const int rows = batch.batch * batch.seq;
  const int d = cfg.d_model;
  Gradients grads = zeros_like(params);

  // Head and final norm.
  kernels::matmul_at_b(trace.lnf_out.data(), dlogits.data(),
                       grads.head.data(), rows, d, cfg.vocab_size);
  Tensor d_lnf_out = Tensor::uninit(rows, d);
  kernels::matmul_a_bt(dlogits.data(), params.head.data(), d_lnf_out.data(),
                       rows, cfg.vocab_size, d);
  Tensor dx = Tensor::uninit(rows, d);
  kernels::layernorm_grad(trace.x_final.data(), params.lnf_gain.data(),
                          trace.lnf_mean.data(), trace.lnf_rstd.data(),
                          d_lnf_out.data(), dx.data(), grads.lnf_gain.data(),
                          grads.lnf_bias.data(), rows, d);

  const AttnShape shape{batch.batch, batch.seq, cfg.n_heads, d / cfg.n_heads};
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
    LayerParams& gp = grads.layers[static_cast<std::size_t>(l)];
    ForwardTrace::LayerTrace& lt = trace.layers[static_cast<std::size_t>(l)];

    // Feed-forward block: x_next = x_mid + ff2(gelu(ff1(ln2(x_mid)))).
    Tensor d_ff_out = dx;
    if (lt.ff_drop.size() > 0) {
      for (std::size_t i = 0; i < d_ff_out.v.size(); ++i) {
        d_ff_out.v[i] *= lt.ff_drop.v[i];
      }
    }
    Tensor d_ff_act = Tensor::uninit(rows, cfg.d_ff);
    kernels::matmul_a_bt(d_ff_out.data(), lp.w_ff2.data(), d_ff_act.data(),
                         rows, d, cfg.d_ff);
    kernels::matmul_at_b(lt.ff_act.data(), d_ff_out.data(), gp.w_ff2.data(),
                         rows, cfg.d_ff, d);
    kernels::col_sums_accum(d_ff_out.data(), gp.b_ff2.data(), rows, d);

    Tensor d_ff_pre = Tensor::uninit(rows, cfg.d_ff);
    kernels::gelu_grad(lt.ff_pre.data(), d_ff_act.data(), d_ff_pre.data(),
                       lt.ff_pre.size());

    Tensor d_ln2_out = Tensor::uninit(rows, d);
    kernels::matmul_a_bt(d_ff_pre.data(), lp.w_ff1.data(), d_ln2_out.data(),
                         rows, cfg.d_ff, d);
    kernels::matmul_at_b(lt.ln2_out.data(), d_ff_pre.data(), gp.w_ff1.data(),
                         rows, d, cfg.d_ff);
    kernels::col_sums_accum(d_ff_pre.data(), gp.b_ff1.data(), rows, cfg.d_ff);

    Tensor d_x_mid = Tensor::uninit(rows, d);
    kernels::layernorm_grad(lt.x_mid.data(), lp.ln2_gain.data(),
                            lt.ln2_mean.data(), lt.ln2_rstd.data(),
                            d_ln2_out.data(), d_x_mid.data(),
                            gp.ln2_gain.data(), gp.ln2_bias.data(), rows, d);
    kernels::add_inplace(d_x_mid.data(), dx.data(), d_x_mid.size());

    // Attention block: x_mid = x_in + wo(attend(q, k, v)).
    Tensor d_att_branch = d_x_mid;
    if (lt.attn_drop.size() > 0) {
      for (std::size_t i = 0; i < d_att_branch.v.size(); ++i) {
        d_att_branch.v[i] *= lt.attn_drop.v[i];
      }
    }
    Tensor d_att_mix = Tensor::uninit(rows, d);
    kernels::matmul_a_bt(d_att_branch.data(), lp.wo.data(), d_att_mix.data(),
                         rows, d, d);
    kernels::matmul_at_b(lt.att_mix.data(), d_att_branch.data(), gp.wo.data(),
                         rows, d, d);

    Tensor dq = Tensor::uninit(rows, d);
    Tensor dk(rows, d), dv(rows, d);  // accumulated into; must start zero
    attention_backward(lt.q, lt.k, lt.v, batch.lengths, shape, lt.probs,
                       d_att_mix, dq, dk, dv);

    Tensor d_ln1_out = Tensor::uninit(rows, d);
    kernels::matmul_a_bt(dq.data(), lp.wq.data(), d_ln1_out.data(), rows, d, d);
    Tensor tmp = Tensor::uninit(rows, d);
    kernels::matmul_a_bt(dk.data(), lp.wk.data(), tmp.data(), rows, d, d);
    kernels::add_inplace(d_ln1_out.data(), tmp.data(), tmp.size());
    kernels::matmul_a_bt(dv.data(), lp.wv.data(), tmp.data(), rows, d, d);
    kernels::add_inplace(d_ln1_out.data(), tmp.data(), tmp.size());

    kernels::matmul_at_b(lt.ln1_out.data(), dq.data(), gp.wq.data(), rows, d,
                         d);
    kernels::matmul_at_b(lt.ln1_out.data(), dk.data(), gp.wk.data(), rows, d,
                         d);
    kernels::matmul_at_b(lt.ln1_out.data(), dv.data(), gp.wv.data(), rows, d,
                         d);

    Tensor d_x_in = Tensor::uninit(rows, d);
    kernels::layernorm_grad(lt.x_in.data(), lp.ln1_gain.data(),
                            lt.ln1_mean.data(), lt.ln1_rstd.data(),
                            d_ln1_out.data(), d_x_in.data(),
                            gp.ln1_gain.data(), gp.ln1_bias.data(), rows, d);
    kernels::add_inplace(d_x_in.data(), d_x_mid.data(), d_x_in.size());
    dx = std::move(d_x_in);
  }

  // Embedding grads: parallel over feature columns, serial over positions,
  // so every (row, column) cell accumulates in one fixed order.
  kernels::parallel_for(d, [&](int c) {
    for (int b = 0; b < batch.batch; ++b) {
      for (int t = 0; t < batch.seq; ++t) {
        const int row = b * batch.seq + t;
        const int id = batch.ids[static_cast<std::size_t>(row)];
        grads.tok_emb.at(id, c) += dx.at(row, c);
        grads.pos_emb.at(t, c) += dx.at(row, c);
      }
    }
  });
  return grads;
}

// ---- greedy decoding -----------------------------------------------------------

std::vector<int> greedy_decode(const Parameters& params,
                               const std::vector<int>& prompt,
                               int max_new_tokens, int eos_id) {
  const ModelConfig& cfg = params.config;
  if (prompt.empty()) throw SequenceTooLong("prompt must be nonempty");
  if (static_cast<int>(prompt.size()) >= cfg.max_seq_len) {
    throw SequenceTooLong("prompt length " + std::to_string(prompt.size()) +
                          " must be < max_seq_len " +
                          std::to_string(cfg.max_seq_len));
  }
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const int layer_count = cfg.n_layers;

  // Per-layer key/value rows, appended position by position. Incremental
  // computation matches the batched forward bit-for-bit because every sum
  // below runs in the same order over the same prefix.
  std::vector<Tensor> kcache(static_cast<std::size_t>(layer_count),
                             Tensor(cfg.max_seq_len, d));
  std::vector<Tensor> vcache(static_cast<std::size_t>(layer_count),
                             Tensor(cfg.max_seq_len, d));

  std::vector<int> out = prompt;
  std::vector<double> x(static_cast<std::size_t>(d));
  std::vector<double> buf(static_cast<std::size_t>(d));
  std::vector<double> qrow(static_cast<std::size_t>(d));
  std::vector<double> mixrow(static_cast<std::size_t>(d));
  std::vector<double> ff_pre(static_cast<std::size_t>(cfg.d_ff));
  std::vector<double> ff_act(static_cast<std::size_t>(cfg.d_ff));
  std::vector<double> logits(static_cast<std::size_t>(cfg.vocab_size));
  double mean = 0.0, rstd = 0.0;

  auto step = [&](int id, int t) {
    for (int c = 0; c < d; ++c) {
      x[static_cast<std::size_t>(c)] =
          params.tok_emb.at(id, c) + params.pos_emb.at(t, c);
    }
    for (int l = 0; l < layer_count; ++l) {
      const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
      kernels::layernorm(x.data(), lp.ln1_gain.data(), lp.ln1_bias.data(),
                         buf.data(), &mean, &rstd, 1, d, kLnEps);
      Tensor& kc = kcache[static_cast<std::size_t>(l)];
      Tensor& vc = vcache[static_cast<std::size_t>(l)];
      kernels::matmul(buf.data(), lp.wq.data(), qrow.data(), 1, d, d);
      kernels::matmul(buf.data(), lp.wk.data(), &kc.at(t, 0), 1, d, d);
      kernels::matmul(buf.data(), lp.wv.data(), &vc.at(t, 0), 1, d, d);
      for (int h = 0; h < heads; ++h) {
        const int hc0 = h * hd;
        std::vector<double> scores(static_cast<std::size_t>(t) + 1);
        double mx = -1e300;
        for (int u = 0; u <= t; ++u) {
          double acc = 0.0;
          for (int c = 0; c < hd; ++c) {
            acc += qrow[static_cast<std::size_t>(hc0 + c)] * kc.at(u, hc0 + c);
          }
          acc *= scale;
          scores[static_cast<std::size_t>(u)] = acc;
          if (acc > mx) mx = acc;
        }
        double denom = 0.0;
        for (int u = 0; u <= t; ++u) {
          double e = std::exp(scores[static_cast<std::size_t>(u)] - mx);
          scores[static_cast<std::size_t>(u)] = e;
          denom += e;
        }
        for (int c = 0; c < hd; ++c) {
          double acc = 0.0;
          for (int u = 0; u <= t; ++u) {
            acc += (scores[static_cast<std::size_t>(u)] / denom) *
                   vc.at(u, hc0 + c);
          }
          mixrow[static_cast<std::size_t>(hc0 + c)] = acc;
        }
      }
      kernels::matmul(mixrow.data(), lp.wo.data(), buf.data(), 1, d, d);
      for (int c = 0; c < d; ++c) x[static_cast<std::size_t>(c)] += buf[static_cast<std::size_t>(c)];

      kernels::layernorm(x.data(), lp.ln2_gain.data(), lp.ln2_bias.data(),
                         buf.data(), &mean, &rstd, 1, d, kLnEps);
      kernels::matmul_bias(buf.data(), lp.w_ff1.data(), lp.b_ff1.data(),
                           ff_pre.data(), 1, d, cfg.d_ff);
      kernels::gelu(ff_pre.data(), ff_act.data(), ff_pre.size());
      kernels::matmul_bias(ff_act.data(), lp.w_ff2.data(), lp.b_ff2.data(),
                           buf.data(), 1, cfg.d_ff, d);
      for (int c = 0; c < d; ++c) x[static_cast<std::size_t>(c)] += buf[static_cast<std::size_t>(c)];
    }
    kernels::layernorm(x.data(), params.lnf_gain.data(),
                       params.lnf_bias.data(), buf.data(), &mean, &rstd, 1, d,
                       kLnEps);
    kernels::matmul(buf.data(), params.head.data(), logits.data(), 1, d,
                    cfg.vocab_size);
  };

  for (std::size_t t = 0; t < prompt.size(); ++t) {
    step(prompt[t], static_cast<int>(t));
  }
  for (int emitted = 0; emitted < max_new_tokens; ++emitted) {
    int t = static_cast<int>(out.size());
    if (t >= cfg.max_seq_len) break;
    int best = 0;
    for (int j = 1; j < cfg.vocab_size; ++j) {
      if (logits[static_cast<std::size_t>(j)] >
          logits[static_cast<std::size_t>(best)]) {
        best = j;
      }
    }
    out.push_back(best);
    if (best == eos_id) break;
    step(best, t);
  }
  return out;
}

}  // namespace cotpot::model
