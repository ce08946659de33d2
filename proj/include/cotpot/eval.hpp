#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotpot/curriculum.hpp"
#include "cotpot/minilang.hpp"
#include "cotpot/model.hpp"
#include "cotpot/problem_gen.hpp"
#include "cotpot/tokenizer.hpp"

// Scoring of trained models: greedy decoding, exact answer comparison,
// per-step-count breakdowns, forgetting probes, the strategy ablation table,
// and side-by-side case transcripts.
namespace cotpot::eval {

struct EmptyManifest : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FailureKind {
  WrongAnswer,
  ExecError,
  ParseFail,
  NoAnswerFound,
  Truncated,
};
const char* failure_name(FailureKind f);

struct Extraction {
  std::optional<Rational> value;
  std::optional<FailureKind> failure;  // set when value is absent
};

// Prose rationales surrender the value after their last "####" sentinel;
// program rationales are interpreted under the standard limits. Failures are
// values, never exceptions.
Extraction answer_of(const std::string& text, problem_gen::Mode mode,
                     const minilang::EvalLimits& limits = {});

struct EvalOptions {
  // Decode budget per problem: multiplier x gold rationale token count,
  // capped by the model's max_seq_len.
  int decode_budget_multiplier = 4;
};

struct EvalResult {
  std::string dataset;
  problem_gen::Mode mode;
  double accuracy = 0.0;
  long n = 0;
  // Bucket 1, 2, 3 and 4 (meaning 4+), each mapping to (correct, total).
  std::map<int, std::pair<long, long>> per_step;
  std::map<FailureKind, long> failures;
};

inline constexpr int kMaxStepBucket = 4;  // the "4+" bucket

EvalResult evaluate(const model::Parameters& params,
                    const std::vector<problem_gen::Problem>& problems,
                    problem_gen::Mode mode, const tok::Vocab& vocab,
                    const std::string& dataset_name,
                    const EvalOptions& opts = {});

// Outcome of scoring a single problem; shared by evaluate() and the case
// transcripts so both report identical verdicts.
struct ProblemScore {
  std::string decoded_text;
  bool correct = false;
  std::optional<FailureKind> failure;
  std::optional<Rational> got;
};
ProblemScore score_problem(const model::Parameters& params,
                           const problem_gen::Problem& problem,
                           problem_gen::Mode mode, const tok::Vocab& vocab,
                           const EvalOptions& opts = {});

struct ForgettingProbe {
  double cot_accuracy_after_phase1 = 0.0;
  double cot_accuracy_after_phase2 = 0.0;
  double delta = 0.0;  // after_phase2 - after_phase1
};

// Requires a run with at least two phase checkpoints.
ForgettingProbe forgetting_probe(const curriculum::RunRecord& run,
                                 const std::vector<problem_gen::Problem>& cot_problems,
                                 const tok::Vocab& vocab,
                                 const EvalOptions& opts = {});

void save_eval_csv(const EvalResult& result, const std::string& path);

// ---- ablation --------------------------------------------------------------

struct AblationConfig {
  std::vector<curriculum::StrategySpec> strategies =
      curriculum::StrategySpec::ablation_roster();
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  double retention_fraction = 0.2;
  curriculum::TrainConfig train;
  model::ModelConfig model;
  EvalOptions eval;
};

struct AblationRun {
  std::string strategy;
  std::uint64_t seed = 0;
  std::string run_dir;
  std::string primary_mode;
  double accuracy = 0.0;
  std::optional<ForgettingProbe> probe;  // two-phase strategies only
};

struct AblationInputs {
  std::vector<tok::EncodedExample> d_cot;
  std::vector<tok::EncodedExample> d_pot;
  std::vector<problem_gen::Problem> held_out;
  std::vector<tok::EncodedExample> probe_cot_loss_batch;
};

// Trains strategy x seed runs under run_root (reusing any completed run
// directory), evaluates each in its primary mode, probes forgetting on the
// two-phase runs, and persists per-run eval artifacts.
std::vector<AblationRun> run_ablation(const AblationConfig& config,
                                      const AblationInputs& inputs,
                                      const tok::Vocab& vocab,
                                      const std::string& run_root,
                                      const std::string& config_snapshot);

// Re-reads the per-run summaries written by run_ablation.
std::vector<AblationRun> load_ablation_runs(
    const std::vector<std::string>& run_dirs);

void write_ablation_csv(const std::vector<AblationRun>& runs,
                        const std::string& path);
std::string render_ablation_table(const std::vector<AblationRun>& runs);

// Side-by-side transcript for one problem across three checkpoints.
struct CaseModels {
  const model::Parameters* cot_model;
  const model::Parameters* pot_model;
  const model::Parameters* curriculum_model;
};
std::string case_transcript(const CaseModels& models,
                            const problem_gen::Problem& problem,
                            const tok::Vocab& vocab,
                            const EvalOptions& opts = {});

}  // namespace cotpot::eval
