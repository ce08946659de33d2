#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cotpot/problem_gen.hpp"

// The data machinery: a parametric noisy teacher emits candidate rationales,
// candidates are verified against the gold answer, and near-duplicates are
// dropped. Only verified-correct candidates ever reach a training corpus.
namespace cotpot::synth {

struct TeacherConfig {
  int candidates_per_problem = 1;  // per mode
  double arithmetic_error_prob = 0.0;
  double step_deletion_prob = 0.0;
  double lexical_jitter_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  // Convenience knob: one temperature value maps onto the three corruption
  // probabilities.
  static TeacherConfig from_temperature(double temperature, int k,
                                        std::uint64_t seed);
};

enum class CorruptionKind { ArithmeticError, StepDeletion };

struct CorruptionEvent {
  CorruptionKind kind;
  int step;  // 0-based index into the gold chain
};

struct Candidate {
  std::string problem_id;
  problem_gen::Mode mode;
  std::string text;
  std::vector<CorruptionEvent> provenance;  // empty iff text == gold up to jitter
  bool jittered = false;
};

enum class Verdict { Correct, Wrong, Invalid };

// k candidates per mode, corruption coins drawn independently per step,
// deterministic for a fixed (problem, teacher seed).
std::vector<Candidate> sample_candidates(const problem_gen::Problem& problem,
                                         const TeacherConfig& teacher);

// Step-by-step rationales are judged by their final sentinel line, programs by
// exact interpretation against gold.
Verdict verify(const Candidate& candidate, const problem_gen::Problem& problem);

// Word-level 4-gram Jaccard similarity in [0, 1].
double jaccard_4gram(const std::string& a, const std::string& b);

// Greedy pass in (problem_id, candidate index) order; keeps a candidate iff
// its similarity to every kept candidate of the same problem and mode is
// strictly below the threshold.
std::vector<Candidate> dedup(const std::vector<Candidate>& candidates,
                             double threshold);

struct FilterCounts {
  long generated = 0;
  long verified_correct = 0;
  long rejected_wrong = 0;
  long rejected_invalid = 0;
  long removed_duplicates = 0;
  long kept = 0;
};

struct FilterReport {
  FilterCounts total;
  std::map<std::string, FilterCounts> per_mode;  // keys "cot", "pot"
};

struct AcceptedPair {
  std::size_t problem_index;
  problem_gen::Rationale rationale;
};

std::pair<std::vector<AcceptedPair>, FilterReport> build_corpus(
    const std::vector<problem_gen::Problem>& problems,
    const TeacherConfig& teacher, double dedup_threshold);

// ---- persistence -----------------------------------------------------------

void save_corpus(const std::vector<AcceptedPair>& pairs,
                 const std::vector<problem_gen::Problem>& problems,
                 const std::string& path);
// Returns (problem index within `problems`, rationale) pairs.
std::vector<AcceptedPair> load_corpus(
    const std::vector<problem_gen::Problem>& problems, const std::string& path);

void save_filter_report(const FilterReport& report, const std::string& path);

}  // namespace cotpot::synth
