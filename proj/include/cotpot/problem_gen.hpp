#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotpot/rational.hpp"
#include "cotpot/rng.hpp"

// Deterministic generator for multi-step arithmetic word problems with gold
// answers and gold rationales in both surface formats (step-by-step prose and
// an executable program). Stands in for a curated seed corpus so that every
// gold answer is known analytically.
namespace cotpot::problem_gen {

enum class Op { Add, Sub, Mul, Div };
enum class Magnitude { Small, Large };
enum class Mode { Cot, Pot };

const char* mode_name(Mode m);
char op_char(Op op);

struct InvalidSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  int step_count = 2;  // 1..8
  Magnitude magnitude = Magnitude::Small;
  std::vector<Op> allowed_ops = {Op::Add, Op::Sub, Op::Mul, Op::Div};
  int template_family = 0;
  bool rational_division = false;  // when false every division is exact
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidSpec
};

// One arithmetic step. Operand references: -1 is the initial quantity,
// k >= 0 is the intermediate result of step k.
struct SymbolicStep {
  Op op;
  int lhs_ref;
  std::optional<int> rhs_ref;  // reference operand, or
  Rational rhs_const;          // fresh constant when rhs_ref is empty
  Rational result;
};

struct Rationale {
  Mode mode;
  std::string text;
};

struct Problem {
  std::string id;
  std::string question;
  std::vector<std::pair<std::string, Rational>> entities;
  std::vector<SymbolicStep> steps;
  Rational answer;
  int step_count = 0;
  Rationale cot;
  Rationale pot;
};

// Rendering variants: index 0 is the gold surface form; higher indices are the
// lexical-jitter alternatives used by the synthetic teacher.
inline constexpr int kRenderVariants = 3;

Problem generate_problem(const ProblemSpec& spec);
Rationale render_cot(const Problem& problem, int variant = 0);
Rationale render_pot(const Problem& problem, int variant = 0);
int template_family_count();

// Every surface word any template can emit; vocabulary construction unions
// this with the corpus so held-out renders can never fall out of vocabulary.
std::vector<std::string> grammar_lexicon();

struct DatasetManifest {
  std::string name;
  std::string split;  // "train" or "held_out"
  std::vector<std::string> problem_ids;
  // counts[mode][step_count]; each mode's counts sum to problem_ids.size()
  std::map<std::string, std::map<int, int>> counts;
  std::string config_hash;
};

struct GenConfig {
  int train_size = 2000;
  int held_out_size = 200;
  std::vector<int> step_counts = {1, 2, 3, 4, 5, 6};
  double large_fraction = 0.25;
  std::vector<Op> allowed_ops = {Op::Add, Op::Sub, Op::Mul, Op::Div};
  bool rational_division = false;
  std::uint64_t master_seed = 1;

  std::string fingerprint() const;
};

struct Dataset {
  DatasetManifest train_manifest;
  DatasetManifest held_out_manifest;
  std::vector<Problem> train;
  std::vector<Problem> held_out;
};

// Reproducible from master_seed; the two splits are disjoint both by id and
// by question text.
Dataset generate_dataset(const GenConfig& config);

// ---- persistence (formats documented in docs/file_formats.md) -------------

void save_problems(const std::vector<Problem>& problems, const std::string& path);
std::vector<Problem> load_problems(const std::string& path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

}  // namespace cotpot::problem_gen
