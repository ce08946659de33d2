#include "cotpot/curriculum.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cotpot/checkpoint.hpp"
#include "cotpot/rng.hpp"

namespace cotpot::curriculum {

namespace fs = std::filesystem;

std::string StrategySpec::name() const {
  switch (kind) {
    case Strategy::CotOnly: return "cot-only";
    case Strategy::PotOnly: return "pot-only";
    case Strategy::Mixed: return "mixed";
    case Strategy::CotThenPot:
      return retention ? "cot-then-pot" : "cot-then-pot-no-retention";
    case Strategy::PotThenCot:
      return retention ? "pot-then-cot" : "pot-then-cot-no-retention";
  }
  return "?";
}

std::optional<StrategySpec> StrategySpec::parse(const std::string& name) {
  for (const StrategySpec& s : ablation_roster()) {
    if (s.name() == name) return s;
  }
  return std::nullopt;
}

std::vector<StrategySpec> StrategySpec::ablation_roster() {
  return {
      {Strategy::CotOnly, false},
      {Strategy::PotOnly, false},
      {Strategy::Mixed, false},
      {Strategy::CotThenPot, true},
      {Strategy::CotThenPot, false},
      {Strategy::PotThenCot, true},
      {Strategy::PotThenCot, false},
  };
}

void TrainConfig::validate() const {
  if (peak_lr <= 0) throw std::invalid_argument("peak_lr must be positive");
  if (warmup_fraction < 0 || warmup_fraction >= 1) {
    throw std::invalid_argument("warmup_fraction must be in [0, 1)");
  }
  if (epochs_per_phase < 0) {
    throw std::invalid_argument("epochs_per_phase must be >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (clip_norm <= 0) throw std::invalid_argument("clip_norm must be positive");
  if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1) {
    throw std::invalid_argument("moment decays must be in (0, 1)");
  }
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
}

// ---- phase plans -------------------------------------------------------------

namespace {

std::vector<tok::EncodedExample> sample_without_replacement(
    const std::vector<tok::EncodedExample>& source, std::size_t count,
    Rng& rng) {
  count = std::min(count, source.size());
  std::vector<int> idx(source.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  rng.shuffle(idx);
  std::vector<tok::EncodedExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(source[static_cast<std::size_t>(idx[i])]);
  }
  return out;
}

Phase mixed_phase(const std::vector<tok::EncodedExample>& primary,
                  const std::vector<tok::EncodedExample>& retained,
                  const std::string& label, int epochs, Rng& rng) {
  std::vector<tok::EncodedExample> data = primary;
  data.insert(data.end(), retained.begin(), retained.end());
  rng.shuffle(data);
  return {std::move(data), epochs, label};
}

}  // namespace

PhasePlan build_phase_plan(const StrategySpec& strategy,
                           const std::vector<tok::EncodedExample>& d_cot,
                           const std::vector<tok::EncodedExample>& d_pot,
                           const RetentionConfig& retention, int epochs) {
  if (d_cot.empty()) throw EmptyDataset("d_cot is empty");
  if (d_pot.empty()) throw EmptyDataset("d_pot is empty");
  Rng rng(mix_seed(retention.seed, "phase_plan/" + strategy.name()));
  auto retained_from = [&](const std::vector<tok::EncodedExample>& source,
                           std::size_t phase2_size) {
    std::vector<tok::EncodedExample> retained;
    if (strategy.retention) {
      auto count = static_cast<std::size_t>(std::llround(
          retention.fraction * static_cast<double>(phase2_size)));
      retained = sample_without_replacement(source, count, rng);
    }
    return retained;
  };

  PhasePlan plan;
  switch (strategy.kind) {
    case Strategy::CotOnly:
      plan.phases.push_back({d_cot, epochs, "cot"});
      break;
    case Strategy::PotOnly:
      plan.phases.push_back({d_pot, epochs, "pot"});
      break;
    case Strategy::Mixed:
      plan.phases.push_back(mixed_phase(d_cot, d_pot, "cot+pot", epochs, rng));
      break;
    case Strategy::CotThenPot: {
      plan.phases.push_back({d_cot, epochs, "cot"});
      auto retained = retained_from(d_cot, d_pot.size());
      plan.phases.push_back(
          mixed_phase(d_pot, retained, "pot", epochs, rng));
      break;
    }
    case Strategy::PotThenCot: {
      plan.phases.push_back({d_pot, epochs, "pot"});
      auto retained = retained_from(d_pot, d_cot.size());
      plan.phases.push_back(
          mixed_phase(d_cot, retained, "cot", epochs, rng));
      break;
    }
  }
  return plan;
}

// ---- schedule -----------------------------------------------------------------

double lr_at(long step, long total_steps, const TrainConfig& config) {
  if (total_steps <= 0) return 0.0;
  if (step >= total_steps) return 0.0;
  const long warmup =
      static_cast<long>(config.warmup_fraction * static_cast<double>(total_steps));
  if (warmup > 0 && step <= warmup) {
    return config.peak_lr * static_cast<double>(step) /
           static_cast<double>(warmup);
  }
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(total_steps - warmup);
  return config.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// ---- training ------------------------------------------------------------------

std::vector<std::vector<int>> epoch_batches(int n, int batch_size, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  rng.shuffle(batches);
  return batches;
}

std::vector<std::vector<int>> epoch_batches_by_length(
    const std::vector<tok::EncodedExample>& dataset, int batch_size,
    Rng& rng) {
  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  // Group similar lengths to cut padding waste; the shuffle above decides
  // ties and the final shuffle decides batch order, so epochs still vary.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dataset[static_cast<std::size_t>(a)].ids.size() <
           dataset[static_cast<std::size_t>(b)].ids.size();
  });
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  rng.shuffle(batches);
  return batches;
}

PackedBatch pack_examples(const std::vector<tok::EncodedExample>& examples,
                          const std::vector<int>& indices) {
  PackedBatch out;
  int max_len = 1;
  for (int i : indices) {
    max_len = std::max(
        max_len,
        static_cast<int>(examples[static_cast<std::size_t>(i)].ids.size()));
  }
  const int b = static_cast<int>(indices.size());
  out.batch.batch = b;
  out.batch.seq = max_len;
  out.batch.pad_id = tok::kPad;
  out.batch.ids.assign(static_cast<std::size_t>(b) * max_len, tok::kPad);
  out.batch.lengths.resize(static_cast<std::size_t>(b));
  out.targets.assign(static_cast<std::size_t>(b) * max_len, tok::kPad);
  out.target_mask.assign(static_cast<std::size_t>(b) * max_len, 0);
  for (int r = 0; r < b; ++r) {
    const tok::EncodedExample& ex =
        examples[static_cast<std::size_t>(indices[static_cast<std::size_t>(r)])];
    const int len = static_cast<int>(ex.ids.size());
    out.batch.lengths[static_cast<std::size_t>(r)] = len;
    for (int t = 0; t < len; ++t) {
      out.batch.ids[static_cast<std::size_t>(r) * max_len + t] =
          ex.ids[static_cast<std::size_t>(t)];
    }
    // Position t predicts token t+1; supervise where the next token is in
    // the rationale region.
    for (int t = 0; t + 1 < len; ++t) {
      out.targets[static_cast<std::size_t>(r) * max_len + t] =
          ex.ids[static_cast<std::size_t>(t) + 1];
      out.target_mask[static_cast<std::size_t>(r) * max_len + t] =
          ex.loss_mask[static_cast<std::size_t>(t) + 1];
    }
  }
  return out;
}

namespace {

struct AdamState {
  model::Gradients m;
  model::Gradients v;
  long t = 0;
};

double global_grad_norm(const model::Gradients& grads) {
  double total = 0.0;
  grads.visit([&](const std::string&, const model::Tensor& g) {
    for (double x : g.v) total += x * x;
  });
  return std::sqrt(total);
}

void adam_step(model::Parameters& params, const model::Gradients& grads,
               AdamState& state, double lr, const TrainConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  // Walk the three structures in lockstep; visit order is fixed.
  std::vector<model::Tensor*> pt, mt, vt;
  std::vector<const model::Tensor*> gt;
  params.visit([&](const std::string&, model::Tensor& t) { pt.push_back(&t); });
  state.m.visit([&](const std::string&, model::Tensor& t) { mt.push_back(&t); });
  state.v.visit([&](const std::string&, model::Tensor& t) { vt.push_back(&t); });
  grads.visit([&](const std::string&, const model::Tensor& t) {
    gt.push_back(&t);
  });
  for (std::size_t i = 0; i < pt.size(); ++i) {
    model::Tensor& p = *pt[i];
    model::Tensor& m = *mt[i];
    model::Tensor& v = *vt[i];
    const model::Tensor& g = *gt[i];
    kernels::parallel_for(
        static_cast<int>(p.v.size()), [&](int j) {
          auto idx = static_cast<std::size_t>(j);
          double gj = g.v[idx];
          m.v[idx] = cfg.beta1 * m.v[idx] + (1.0 - cfg.beta1) * gj;
          v.v[idx] = cfg.beta2 * v.v[idx] + (1.0 - cfg.beta2) * gj * gj;
          double mhat = m.v[idx] / bc1;
          double vhat = v.v[idx] / bc2;
          p.v[idx] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        });
  }
}

}  // namespace

TrainPhaseResult train_phase(model::Parameters params,
                             const std::vector<tok::EncodedExample>& dataset,
                             const TrainConfig& config, int phase_index,
                             long step_offset) {
  config.validate();
  if (dataset.empty()) throw EmptyDataset("train_phase on empty dataset");
  TrainPhaseResult out;
  out.curve.clear();

  const int n = static_cast<int>(dataset.size());
  const long steps_per_epoch =
      (n + config.batch_size - 1) / config.batch_size;
  const long total_steps = steps_per_epoch * config.epochs_per_phase;

  AdamState adam;
  adam.m = model::zeros_like(params);
  adam.v = model::zeros_like(params);

  long step = 0;
  for (int epoch = 0; epoch < config.epochs_per_phase; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, "shuffle/" +
                                              std::to_string(phase_index) +
                                              "/" + std::to_string(epoch)));
    auto batches =
        epoch_batches_by_length(dataset, config.batch_size, shuffle_rng);
    for (const auto& batch_indices : batches) {
      PackedBatch packed = pack_examples(dataset, batch_indices);
      packed.batch.dropout_salt =
          mix_seed(config.seed, "drop/" + std::to_string(step_offset + step));
      model::ForwardTrace trace;
      model::Tensor logits =
          model::forward_logits(params, packed.batch, &trace);
      model::LossGrad lg =
          model::nll_loss_grad(logits, packed.targets, packed.target_mask);
      if (!std::isfinite(lg.loss)) {
        throw NonFiniteLoss("loss became non-finite at phase " +
                            std::to_string(phase_index) + " step " +
                            std::to_string(step_offset + step));
      }
      model::Gradients grads = model::backward(params, trace, lg.dlogits);

      const double norm = global_grad_norm(grads);
      if (norm > config.clip_norm) {
        const double scale = config.clip_norm / norm;
        grads.visit([&](const std::string&, model::Tensor& g) {
          kernels::scale_inplace(g.data(), scale, g.v.size());
        });
      }
      const double lr = lr_at(step, total_steps, config);
      adam_step(params, grads, adam, lr, config);

      out.curve.push_back({step_offset + step, phase_index, lr, lg.loss});
      ++step;
    }
  }
  out.params = std::move(params);
  return out;
}

// ---- run persistence ---------------------------------------------------------------

namespace {

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_losses_csv(const std::string& path,
                      const std::vector<LossPoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError("cannot write " + path);
  out << "# cotpot-losses v1\n";
  out << "step,phase,lr,loss\n";
  for (const LossPoint& p : curve) {
    out << p.step << "," << p.phase << "," << fmt_double(p.lr) << ","
        << fmt_double(p.loss) << "\n";
  }
}

std::vector<LossPoint> read_losses_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot read " + path);
  std::string line;
  std::getline(in, line);  // schema
  std::getline(in, line);  // header
  std::vector<LossPoint> curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossPoint p;
    if (std::sscanf(line.c_str(), "%ld,%d,%lf,%lf", &p.step, &p.phase, &p.lr,
                    &p.loss) == 4) {
      curve.push_back(p);
    }
  }
  return curve;
}

}  // namespace

RunRecord run_strategy(const StrategySpec& strategy, const RunInputs& inputs,
                       const RetentionConfig& retention,
                       const TrainConfig& train_config,
                       const model::ModelConfig& model_config,
                       const tok::Vocab& vocab, const std::string& run_dir,
                       const std::string& config_snapshot) {
  train_config.validate();
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw PersistenceError("cannot create run dir " + run_dir);

  {
    std::ofstream snap(run_dir + "/config.snapshot", std::ios::binary);
    if (!snap) throw PersistenceError("cannot write config.snapshot");
    snap << config_snapshot;
  }
  vocab.save(run_dir + "/vocab.txt");

  RunRecord record;
  record.run_dir = run_dir;
  record.strategy = strategy.name();
  record.meta["schema"] = "cotpot-runmeta v1";
  record.meta["strategy"] = strategy.name();
  record.meta["code_version"] = "0.1.0";
  record.meta["started_at"] = now_iso8601();
  record.meta["master_seed"] = std::to_string(train_config.seed);
  record.meta["retention_fraction"] = fmt_double(retention.fraction);
  record.meta["retention_seed"] = std::to_string(retention.seed);

  PhasePlan plan = build_phase_plan(strategy, inputs.d_cot, inputs.d_pot,
                                    retention, train_config.epochs_per_phase);

  model::Parameters params = model::init_params(model_config);
  long step_offset = 0;
  for (std::size_t k = 0; k < plan.phases.size(); ++k) {
    const Phase& phase = plan.phases[k];
    const int phase_no = static_cast<int>(k) + 1;
    record.meta["phase" + std::to_string(phase_no) + "_label"] = phase.label;
    record.meta["phase" + std::to_string(phase_no) + "_examples"] =
        std::to_string(phase.dataset.size());
    if (phase_no >= 2 && !inputs.probe_cot.empty()) {
      // Loss on held-out step-by-step rationales with the parameters that
      // enter this phase: the forgetting probe's starting point.
      std::vector<int> all(inputs.probe_cot.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
      PackedBatch probe = pack_examples(inputs.probe_cot, all);
      model::Tensor logits = model::forward_logits(params, probe.batch);
      double probe_loss =
          model::nll_loss(logits, probe.targets, probe.target_mask);
      record.meta["phase" + std::to_string(phase_no) + "_initial_probe_loss"] =
          fmt_double(probe_loss);
    }
    TrainConfig phase_cfg = train_config;
    phase_cfg.seed = mix_seed(train_config.seed, "phase/" +
                                                     std::to_string(phase_no));
    TrainPhaseResult result =
        train_phase(std::move(params), phase.dataset, phase_cfg, phase_no,
                    step_offset);
    params = std::move(result.params);
    record.curve.insert(record.curve.end(), result.curve.begin(),
                        result.curve.end());
    step_offset += static_cast<long>(result.curve.size());

    const std::string ckpt =
        run_dir + "/phase-" + std::to_string(phase_no) + ".ckpt";
    model::save_checkpoint(params, ckpt);
    record.checkpoints.push_back(ckpt);
  }
  record.meta["finished_at"] = now_iso8601();
  record.meta["phases"] = std::to_string(plan.phases.size());

  write_losses_csv(run_dir + "/losses.csv", record.curve);
  {
    std::ofstream meta(run_dir + "/run.meta", std::ios::binary);
    if (!meta) throw PersistenceError("cannot write run.meta");
    meta << "cotpot-runmeta v1\n";
    for (const auto& [key, value] : record.meta) {
      if (key == "schema") continue;
      meta << key << "=" << value << "\n";
    }
  }
  return record;
}

RunRecord load_run_record(const std::string& run_dir) {
  RunRecord record;
  record.run_dir = run_dir;
  std::ifstream meta(run_dir + "/run.meta", std::ios::binary);
  if (!meta) throw PersistenceError("missing run.meta in " + run_dir);
  std::string line;
  std::getline(meta, line);
  if (line != "cotpot-runmeta v1") {
    throw PersistenceError(run_dir + ": unrecognized run.meta schema");
  }
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    record.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  record.strategy = record.meta.count("strategy") ? record.meta["strategy"] : "";
  record.curve = read_losses_csv(run_dir + "/losses.csv");
  for (int phase_no = 1;; ++phase_no) {
    std::string ckpt = run_dir + "/phase-" + std::to_string(phase_no) + ".ckpt";
    if (!fs::exists(ckpt)) break;
    record.checkpoints.push_back(ckpt);
  }
  return record;
}

}  // namespace cotpot::curriculum
