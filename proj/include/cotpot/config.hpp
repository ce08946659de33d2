#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotpot/curriculum.hpp"
#include "cotpot/eval.hpp"
#include "cotpot/model.hpp"
#include "cotpot/problem_gen.hpp"
#include "cotpot/synth.hpp"

// Experiment configuration: defaults, then config file, then environment
// overrides (SECTION__KEY), then command-line overrides, in that precedence.
// The resolved config is snapshotted verbatim into every run directory.
namespace cotpot::config {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg
                                    : msg),
        line_number(line) {}
  int line_number = 0;
};

struct ExperimentConfig {
  // [problems]
  problem_gen::GenConfig problems;
  // [teacher]
  synth::TeacherConfig teacher;
  double teacher_temperature = -1.0;  // >= 0 maps onto the three probabilities
  // [synth]
  double dedup_threshold = 0.7;
  // [model] (vocab_size and init_seed are derived, not configured)
  model::ModelConfig model;
  // [train]
  curriculum::TrainConfig train;
  // [curriculum]
  double retention_fraction = 0.2;
  // [eval]
  eval::EvalOptions eval_opts;
  // [ablate]
  std::vector<std::string> strategies;  // empty = full roster
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  // [run]
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";

  static ExperimentConfig defaults();

  void apply_file(const std::string& path);          // throws ConfigError
  void apply_env();                                  // SECTION__KEY variables
  void apply_override(const std::string& assignment);  // "section.key=value"

  // Finishes derivation (teacher temperature mapping, seeds) and validates.
  void resolve();

  // Canonical resolved text, schema-versioned; reparsing it reproduces the
  // same configuration.
  std::string snapshot() const;
};

}  // namespace cotpot::config
