#include "cotpot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cotpot/checkpoint.hpp"
#include "cotpot/kernels.hpp"

namespace cotpot::eval {

namespace fs = std::filesystem;
using problem_gen::Mode;
using problem_gen::Problem;

const char* failure_name(FailureKind f) {
  switch (f) {
    case FailureKind::WrongAnswer: return "wrong_answer";
    case FailureKind::ExecError: return "exec_error";
    case FailureKind::ParseFail: return "parse_fail";
    case FailureKind::NoAnswerFound: return "no_answer_found";
    case FailureKind::Truncated: return "truncated";
  }
  return "?";
}

Extraction answer_of(const std::string& text, Mode mode,
                     const minilang::EvalLimits& limits) {
  if (mode == Mode::Cot) {
    auto pos = text.rfind("####");
    if (pos == std::string::npos) {
      return {std::nullopt, FailureKind::NoAnswerFound};
    }
    auto value = Rational::parse(text.substr(pos + 4));
    if (!value) return {std::nullopt, FailureKind::NoAnswerFound};
    return {*value, std::nullopt};
  }
  auto result = minilang::run(text, limits);
  if (result.ok()) return {result.value(), std::nullopt};
  switch (result.error().kind) {
    case minilang::ErrorKind::Lex:
    case minilang::ErrorKind::Parse:
    case minilang::ErrorKind::MissingAnswer:
    case minilang::ErrorKind::TrailingStatements:
      return {std::nullopt, FailureKind::ParseFail};
    default:
      return {std::nullopt, FailureKind::ExecError};
  }
}

ProblemScore score_problem(const model::Parameters& params,
                           const Problem& problem, Mode mode,
                           const tok::Vocab& vocab, const EvalOptions& opts) {
  ProblemScore score;
  std::vector<int> prompt = tok::encode_prompt(vocab, problem, mode);
  const std::string& gold_text =
      mode == Mode::Cot ? problem.cot.text : problem.pot.text;
  const int gold_tokens =
      static_cast<int>(tok::encode_text(vocab, gold_text).size());
  const int budget = opts.decode_budget_multiplier * gold_tokens + 1;

  std::vector<int> decoded =
      model::greedy_decode(params, prompt, budget, tok::kEos);
  const bool saw_eos = !decoded.empty() && decoded.back() == tok::kEos;
  std::vector<int> continuation(decoded.begin() +
                                    static_cast<long>(prompt.size()),
                                decoded.end() - (saw_eos ? 1 : 0));
  score.decoded_text = tok::decode(vocab, continuation);
  if (!saw_eos) {
    score.failure = FailureKind::Truncated;
    return score;
  }
  Extraction ex = answer_of(score.decoded_text, mode);
  if (!ex.value) {
    score.failure = ex.failure;
    return score;
  }
  score.got = ex.value;
  if (*ex.value == problem.answer) {
    score.correct = true;
  } else {
    score.failure = FailureKind::WrongAnswer;
  }
  return score;
}

EvalResult evaluate(const model::Parameters& params,
                    const std::vector<Problem>& problems, Mode mode,
                    const tok::Vocab& vocab, const std::string& dataset_name,
                    const EvalOptions& opts) {
  if (problems.empty()) throw EmptyManifest("evaluate on empty manifest");
  EvalResult result;
  result.dataset = dataset_name;
  result.mode = mode;
  result.n = static_cast<long>(problems.size());

  std::vector<ProblemScore> scores(problems.size());
  // Read-only parameters; problems shard across workers, merged in order.
  kernels::parallel_for(static_cast<int>(problems.size()), [&](int i) {
    scores[static_cast<std::size_t>(i)] = score_problem(
        params, problems[static_cast<std::size_t>(i)], mode, vocab, opts);
  });

  long correct_total = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int bucket = std::min(problems[i].step_count, kMaxStepBucket);
    auto& [correct, total] = result.per_step[bucket];
    total += 1;
    if (scores[i].correct) {
      correct += 1;
      correct_total += 1;
    } else {
      result.failures[*scores[i].failure] += 1;
    }
  }
  result.accuracy =
      static_cast<double>(correct_total) / static_cast<double>(result.n);
  return result;
}

ForgettingProbe forgetting_probe(const curriculum::RunRecord& run,
                                 const std::vector<Problem>& cot_problems,
                                 const tok::Vocab& vocab,
                                 const EvalOptions& opts) {
  if (run.checkpoints.size() < 2) {
    throw MissingCheckpoint("forgetting probe needs two phase checkpoints, " +
                            run.run_dir + " has " +
                            std::to_string(run.checkpoints.size()));
  }
  model::Parameters after1 = model::load_checkpoint(run.checkpoints[0]);
  model::Parameters after2 = model::load_checkpoint(run.checkpoints[1]);
  ForgettingProbe probe;
  probe.cot_accuracy_after_phase1 =
      evaluate(after1, cot_problems, Mode::Cot, vocab, "probe", opts).accuracy;
  probe.cot_accuracy_after_phase2 =
      evaluate(after2, cot_problems, Mode::Cot, vocab, "probe", opts).accuracy;
  probe.delta =
      probe.cot_accuracy_after_phase2 - probe.cot_accuracy_after_phase1;
  return probe;
}

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

}  // namespace

void save_eval_csv(const EvalResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# cotpot-eval v1\n";
  out << "dataset,mode,bucket,correct,total\n";
  for (const auto& [bucket, cell] : result.per_step) {
    out << result.dataset << "," << problem_gen::mode_name(result.mode) << ","
        << bucket << (bucket == kMaxStepBucket ? "+" : "") << ","
        << cell.first << "," << cell.second << "\n";
  }
  long correct = 0;
  for (const auto& [bucket, cell] : result.per_step) correct += cell.first;
  out << result.dataset << "," << problem_gen::mode_name(result.mode)
      << ",all," << correct << "," << result.n << "\n";
  for (const auto& [kind, count] : result.failures) {
    out << result.dataset << "," << problem_gen::mode_name(result.mode)
        << ",fail:" << failure_name(kind) << "," << count << "," << result.n
        << "\n";
  }
}

// ---- ablation ------------------------------------------------------------------

namespace {

void write_run_summary(const AblationRun& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "cotpot-evalsummary v1\n";
  out << "strategy=" << run.strategy << "\n";
  out << "seed=" << run.seed << "\n";
  out << "primary_mode=" << run.primary_mode << "\n";
  out << "accuracy=" << fmt_double(run.accuracy) << "\n";
  if (run.probe) {
    out << "probe_acc_phase1=" << fmt_double(run.probe->cot_accuracy_after_phase1)
        << "\n";
    out << "probe_acc_phase2=" << fmt_double(run.probe->cot_accuracy_after_phase2)
        << "\n";
    out << "probe_delta=" << fmt_double(run.probe->delta) << "\n";
  }
}

std::optional<AblationRun> read_run_summary(const std::string& run_dir) {
  std::ifstream in(run_dir + "/eval_summary.txt", std::ios::binary);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line != "cotpot-evalsummary v1") {
    return std::nullopt;
  }
  AblationRun run;
  run.run_dir = run_dir;
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  run.strategy = kv["strategy"];
  run.seed = kv.count("seed") ? std::stoull(kv["seed"]) : 0;
  run.primary_mode = kv["primary_mode"];
  run.accuracy = kv.count("accuracy") ? std::stod(kv["accuracy"]) : 0.0;
  if (kv.count("probe_delta")) {
    ForgettingProbe probe;
    probe.cot_accuracy_after_phase1 = std::stod(kv["probe_acc_phase1"]);
    probe.cot_accuracy_after_phase2 = std::stod(kv["probe_acc_phase2"]);
    probe.delta = std::stod(kv["probe_delta"]);
    run.probe = probe;
  }
  return run;
}

}  // namespace

std::vector<AblationRun> run_ablation(const AblationConfig& config,
                                      const AblationInputs& inputs,
                                      const tok::Vocab& vocab,
                                      const std::string& run_root,
                                      const std::string& config_snapshot) {
  std::vector<AblationRun> runs;
  fs::create_directories(run_root);
  for (const curriculum::StrategySpec& strategy : config.strategies) {
    for (std::uint64_t seed : config.seeds) {
      const std::string run_dir =
          run_root + "/" + strategy.name() + "-seed" + std::to_string(seed);
      if (auto cached = read_run_summary(run_dir)) {
        runs.push_back(*cached);
        continue;
      }
      // Paired comparisons: initialization, shuffling and retention seeds
      // depend on the seed index only, never on the strategy.
      curriculum::TrainConfig train = config.train;
      train.seed = mix_seed(seed, "train");
      model::ModelConfig mc = config.model;
      mc.init_seed = mix_seed(seed, "init");
      curriculum::RetentionConfig retention;
      retention.fraction = config.retention_fraction;
      retention.seed = mix_seed(seed, "retention");

      curriculum::RunInputs rin;
      rin.d_cot = inputs.d_cot;
      rin.d_pot = inputs.d_pot;
      rin.probe_cot = inputs.probe_cot_loss_batch;
      curriculum::RunRecord record = curriculum::run_strategy(
          strategy, rin, retention, train, mc, vocab, run_dir,
          config_snapshot);

      model::Parameters final_params =
          model::load_checkpoint(record.checkpoints.back());
      EvalResult res =
          evaluate(final_params, inputs.held_out, strategy.primary_mode(),
                   vocab, "held_out", config.eval);
      save_eval_csv(res, run_dir + "/eval.csv");

      AblationRun run;
      run.strategy = strategy.name();
      run.seed = seed;
      run.run_dir = run_dir;
      run.primary_mode = problem_gen::mode_name(strategy.primary_mode());
      run.accuracy = res.accuracy;
      if (strategy.two_phase()) {
        run.probe =
            forgetting_probe(record, inputs.held_out, vocab, config.eval);
      }
      write_run_summary(run, run_dir + "/eval_summary.txt");
      runs.push_back(run);
    }
  }
  return runs;
}

std::vector<AblationRun> load_ablation_runs(
    const std::vector<std::string>& run_dirs) {
  std::vector<AblationRun> runs;
  for (const std::string& dir : run_dirs) {
    auto run = read_run_summary(dir);
    if (!run) {
      throw MissingCheckpoint("no eval_summary.txt in " + dir);
    }
    runs.push_back(*run);
  }
  return runs;
}

void write_ablation_csv(const std::vector<AblationRun>& runs,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# cotpot-ablation v1\n";
  out << "strategy,seed,primary_mode,accuracy,probe_acc_phase1,"
         "probe_acc_phase2,probe_delta\n";
  for (const AblationRun& run : runs) {
    out << run.strategy << "," << run.seed << "," << run.primary_mode << ","
        << fmt_double(run.accuracy) << ",";
    if (run.probe) {
      out << fmt_double(run.probe->cot_accuracy_after_phase1) << ","
          << fmt_double(run.probe->cot_accuracy_after_phase2) << ","
          << fmt_double(run.probe->delta);
    } else {
      out << ",,";
    }
    out << "\n";
  }
}

std::string render_ablation_table(const std::vector<AblationRun>& runs) {
  // Aggregate per strategy, preserving first-appearance order.
  struct Agg {
    std::string strategy, mode;
    std::vector<double> acc, probe_delta;
  };
  std::vector<Agg> aggs;
  for (const AblationRun& run : runs) {
    auto it = std::find_if(aggs.begin(), aggs.end(), [&](const Agg& a) {
      return a.strategy == run.strategy;
    });
    if (it == aggs.end()) {
      aggs.push_back({run.strategy, run.primary_mode, {}, {}});
      it = aggs.end() - 1;
    }
    it->acc.push_back(run.accuracy);
    if (run.probe) it->probe_delta.push_back(run.probe->delta);
  }
  auto mean_range = [](const std::vector<double>& xs) -> std::string {
    if (xs.empty()) return "-";
    double lo = xs[0], hi = xs[0], sum = 0.0;
    for (double x : xs) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      sum += x;
    }
    double mean = sum / static_cast<double>(xs.size());
    return fmt3(mean) + " +- " + fmt3((hi - lo) / 2.0);
  };
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %-5s %-18s %-18s\n", "strategy",
                "mode", "accuracy", "probe_delta");
  os << line;
  os << std::string(72, '-') << "\n";
  for (const Agg& a : aggs) {
    std::snprintf(line, sizeof(line), "%-28s %-5s %-18s %-18s\n",
                  a.strategy.c_str(), a.mode.c_str(),
                  mean_range(a.acc).c_str(), mean_range(a.probe_delta).c_str());
    os << line;
  }
  return os.str();
}

std::string case_transcript(const CaseModels& models, const Problem& problem,
                            const tok::Vocab& vocab, const EvalOptions& opts) {
  std::ostringstream os;
  os << "=== case " << problem.id << " ===\n";
  os << "question: " << problem.question << "\n";
  os << "gold answer: " << problem.answer.to_string() << "\n";
  struct Entry {
    const char* label;
    const model::Parameters* params;
    Mode mode;
  };
  const Entry entries[3] = {
      {"cot-only model (cot mode)", models.cot_model, Mode::Cot},
      {"pot-only model (pot mode)", models.pot_model, Mode::Pot},
      {"cot-then-pot model (pot mode)", models.curriculum_model, Mode::Pot},
  };
  for (const Entry& e : entries) {
    os << "--- " << e.label << " ---\n";
    ProblemScore score = score_problem(*e.params, problem, e.mode, vocab, opts);
    os << score.decoded_text << "\n";
    if (score.correct) {
      os << "verdict: correct\n";
    } else {
      os << "verdict: " << failure_name(*score.failure);
      if (score.got) os << " (got " << score.got->to_string() << ")";
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace cotpot::eval
