#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotpot/model.hpp"
#include "cotpot/tokenizer.hpp"

// Training strategies over the two rationale corpora: single-corpus runs, the
// simultaneous mix, and the two-phase curricula in both orders, with an
// optional retention mix that carries first-phase samples into the second
// phase to counter forgetting.
namespace cotpot::curriculum {

struct EmptyDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PersistenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Strategy { CotOnly, PotOnly, Mixed, CotThenPot, PotThenCot };

struct StrategySpec {
  Strategy kind = Strategy::CotThenPot;
  bool retention = true;  // meaningful only for the two-phase strategies

  bool two_phase() const {
    return kind == Strategy::CotThenPot || kind == Strategy::PotThenCot;
  }
  // Evaluation mode for the strategy's headline accuracy.
  problem_gen::Mode primary_mode() const {
    return kind == Strategy::CotOnly ? problem_gen::Mode::Cot
                                     : problem_gen::Mode::Pot;
  }
  std::string name() const;
  static std::optional<StrategySpec> parse(const std::string& name);
  // The seven strategy rows of the ablation, in report order.
  static std::vector<StrategySpec> ablation_roster();
};

struct RetentionConfig {
  double fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  double peak_lr = 3e-4;
  double warmup_fraction = 0.1;  // of each phase's total steps
  int epochs_per_phase = 3;
  int batch_size = 32;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Phase {
  std::vector<tok::EncodedExample> dataset;
  int epochs = 0;
  std::string label;
};

struct PhasePlan {
  std::vector<Phase> phases;
};

// Phase datasets per strategy. Two-phase plans append round(fraction * |second
// phase corpus|) retained first-phase samples (without replacement, capped at
// the source size) when retention is on.
PhasePlan build_phase_plan(const StrategySpec& strategy,
                           const std::vector<tok::EncodedExample>& d_cot,
                           const std::vector<tok::EncodedExample>& d_pot,
                           const RetentionConfig& retention, int epochs);

// Linear warmup to peak_lr over floor(warmup_fraction * total) steps, then
// cosine decay to zero at step == total_steps.
double lr_at(long step, long total_steps, const TrainConfig& config);

// Deterministic epoch partition: a seeded shuffle chopped into batches; every
// example index appears exactly once.
std::vector<std::vector<int>> epoch_batches(int n, int batch_size, Rng& rng);

// Same contract, but batches group examples of similar length so padded
// batch width stays near the true lengths. Used by train_phase.
std::vector<std::vector<int>> epoch_batches_by_length(
    const std::vector<tok::EncodedExample>& dataset, int batch_size, Rng& rng);

struct LossPoint {
  long step = 0;  // global across phases
  int phase = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainPhaseResult {
  model::Parameters params;
  std::vector<LossPoint> curve;
};

// One optimization phase: seeded shuffling, adaptive-moment updates with bias
// correction, global-norm clipping, the lr_at schedule. Optimizer state is
// fresh at every phase start.
TrainPhaseResult train_phase(model::Parameters params,
                             const std::vector<tok::EncodedExample>& dataset,
                             const TrainConfig& config, int phase_index = 1,
                             long step_offset = 0);

struct RunRecord {
  std::string run_dir;
  std::string strategy;
  std::vector<std::string> checkpoints;  // one per phase, in order
  std::vector<LossPoint> curve;
  std::map<std::string, std::string> meta;
};

struct RunInputs {
  std::vector<tok::EncodedExample> d_cot;
  std::vector<tok::EncodedExample> d_pot;
  // Held-out CoT batch whose loss is recorded at the start of phase 2 (the
  // forgetting-probe input). May be empty.
  std::vector<tok::EncodedExample> probe_cot;
};

// Runs all phases, chaining parameters, and persists checkpoints, the loss
// curve, the config snapshot, and run metadata into run_dir.
RunRecord run_strategy(const StrategySpec& strategy, const RunInputs& inputs,
                       const RetentionConfig& retention,
                       const TrainConfig& train_config,
                       const model::ModelConfig& model_config,
                       const tok::Vocab& vocab, const std::string& run_dir,
                       const std::string& config_snapshot);

RunRecord load_run_record(const std::string& run_dir);

// Batch assembly shared with evaluation: pads examples and derives the
// next-token targets plus the supervised-position mask.
struct PackedBatch {
  model::Batch batch;
  std::vector<int> targets;             // batch*seq
  std::vector<std::uint8_t> target_mask;  // batch*seq
};
PackedBatch pack_examples(const std::vector<tok::EncodedExample>& examples,
                          const std::vector<int>& indices);

}  // namespace cotpot::curriculum
