#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cotpot/checkpoint.hpp"
#include "cotpot/eval.hpp"

using namespace cotpot;
using namespace cotpot::eval;
using problem_gen::Mode;
using problem_gen::Problem;

namespace {

std::vector<Problem> make_problems(int n) {
  std::vector<Problem> out;
  for (int i = 0; i < n; ++i) {
    problem_gen::ProblemSpec spec;
    spec.step_count = 1 + i % 6;
    spec.seed = 7000 + static_cast<std::uint64_t>(i) * 3;
    out.push_back(problem_gen::generate_problem(spec));
  }
  return out;
}

tok::Vocab vocab_over(const std::vector<Problem>& problems) {
  std::vector<std::string> corpus;
  for (const auto& p : problems) {
    corpus.push_back(p.question);
    corpus.push_back(p.cot.text);
    corpus.push_back(p.pot.text);
  }
  for (auto& w : problem_gen::grammar_lexicon()) corpus.push_back(w);
  return tok::Vocab::build(corpus);
}

model::Parameters untrained_model(int vocab_size) {
  model::ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.max_seq_len = 288;
  cfg.init_seed = 13;
  return model::init_params(cfg);
}

}  // namespace

TEST_CASE("answer extraction from prose") {
  auto ten = answer_of("Step 1 : 3 * 4 = 12.\nStep 2 : 12 - 2 = 10.\n#### 10",
                       Mode::Cot);
  REQUIRE(ten.value.has_value());
  CHECK(*ten.value == Rational(10));

  // The last sentinel wins.
  auto last = answer_of("#### 3\nmore words\n#### 7", Mode::Cot);
  CHECK(*last.value == Rational(7));

  // Digit runs are rejoined by decode, so a split "1 0" can only come from a
  // malformed generation; extraction stays strict about it.
  auto spaced = answer_of("#### 1 0", Mode::Cot);
  CHECK(*spaced.failure == FailureKind::NoAnswerFound);

  auto fraction = answer_of("#### 10 / 3", Mode::Cot);
  CHECK(*fraction.value == Rational(10, 3));

  auto missing = answer_of("no sentinel here", Mode::Cot);
  CHECK(!missing.value.has_value());
  CHECK(*missing.failure == FailureKind::NoAnswerFound);

  auto garbage = answer_of("#### not a number", Mode::Cot);
  CHECK(*garbage.failure == FailureKind::NoAnswerFound);
}

TEST_CASE("answer extraction from programs") {
  auto ten = answer_of("let a = 3 * 4;\nlet b = a - 2;\nanswer b;", Mode::Pot);
  REQUIRE(ten.value.has_value());
  CHECK(*ten.value == Rational(10));

  auto undefined = answer_of("answer ghost;", Mode::Pot);
  CHECK(*undefined.failure == FailureKind::ExecError);

  auto broken = answer_of("let = 3;", Mode::Pot);
  CHECK(*broken.failure == FailureKind::ParseFail);

  auto no_answer = answer_of("let a = 3;", Mode::Pot);
  CHECK(*no_answer.failure == FailureKind::ParseFail);

  auto div0 = answer_of("let a = 0;\nanswer 3 / a;", Mode::Pot);
  CHECK(*div0.failure == FailureKind::ExecError);
}

TEST_CASE("evaluate on an untrained model: conservation and determinism") {
  auto problems = make_problems(24);
  tok::Vocab vocab = vocab_over(problems);
  model::Parameters params = untrained_model(vocab.size());

  EvalResult a = evaluate(params, problems, Mode::Pot, vocab, "held_out");
  EvalResult b = evaluate(params, problems, Mode::Pot, vocab, "held_out");

  CHECK(a.n == 24);
  long total = 0, correct = 0;
  for (const auto& [bucket, cell] : a.per_step) {
    CHECK(bucket >= 1);
    CHECK(bucket <= kMaxStepBucket);
    correct += cell.first;
    total += cell.second;
  }
  CHECK(total == a.n);
  long failures = 0;
  for (const auto& [kind, count] : a.failures) failures += count;
  CHECK(correct + failures == a.n);
  CHECK(a.accuracy == static_cast<double>(correct) / 24.0);

  CHECK(a.accuracy == b.accuracy);
  CHECK(a.per_step == b.per_step);
  CHECK(a.failures == b.failures);

  CHECK_THROWS_AS(evaluate(params, {}, Mode::Pot, vocab, "x"), EmptyManifest);
}

TEST_CASE("step buckets merge at four and beyond") {
  auto problems = make_problems(24);  // step counts 1..6 round robin
  tok::Vocab vocab = vocab_over(problems);
  model::Parameters params = untrained_model(vocab.size());
  EvalResult r = evaluate(params, problems, Mode::Cot, vocab, "held_out");
  // 24 problems, steps 1..6 x4: buckets 1,2,3 hold 4 each, bucket 4+ holds 12.
  REQUIRE(r.per_step.count(1));
  REQUIRE(r.per_step.count(kMaxStepBucket));
  CHECK(r.per_step.at(1).second == 4);
  CHECK(r.per_step.at(2).second == 4);
  CHECK(r.per_step.at(3).second == 4);
  CHECK(r.per_step.at(kMaxStepBucket).second == 12);
  CHECK(!r.per_step.count(5));
}

TEST_CASE("eval csv output") {
  auto problems = make_problems(12);
  tok::Vocab vocab = vocab_over(problems);
  model::Parameters params = untrained_model(vocab.size());
  EvalResult r = evaluate(params, problems, Mode::Pot, vocab, "held_out");
  auto dir = std::filesystem::temp_directory_path() / "cotpot_eval_test";
  std::filesystem::create_directories(dir);
  save_eval_csv(r, (dir / "eval.csv").string());
  std::ifstream in(dir / "eval.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# cotpot-eval v1");
  std::getline(in, line);
  CHECK(line == "dataset,mode,bucket,correct,total");
  std::filesystem::remove_all(dir);
}

TEST_CASE("forgetting probe needs two checkpoints and is zero on twins") {
  auto problems = make_problems(8);
  tok::Vocab vocab = vocab_over(problems);
  model::Parameters params = untrained_model(vocab.size());

  auto dir = std::filesystem::temp_directory_path() / "cotpot_probe_test";
  std::filesystem::create_directories(dir);
  std::string ckpt = (dir / "phase-1.ckpt").string();
  model::save_checkpoint(params, ckpt);

  curriculum::RunRecord single;
  single.run_dir = dir.string();
  single.checkpoints = {ckpt};
  CHECK_THROWS_AS(forgetting_probe(single, problems, vocab),
                  MissingCheckpoint);

  curriculum::RunRecord twin;
  twin.run_dir = dir.string();
  twin.checkpoints = {ckpt, ckpt};
  ForgettingProbe probe = forgetting_probe(twin, problems, vocab);
  CHECK(probe.delta == 0.0);
  CHECK(probe.cot_accuracy_after_phase1 == probe.cot_accuracy_after_phase2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("case transcripts carry three labeled sections and verdicts") {
  auto problems = make_problems(4);
  tok::Vocab vocab = vocab_over(problems);
  model::Parameters m1 = untrained_model(vocab.size());
  CaseModels models{&m1, &m1, &m1};
  std::string report = case_transcript(models, problems[0], vocab);

  CHECK(report.find("=== case " + problems[0].id) != std::string::npos);
  CHECK(report.find("cot-only model") != std::string::npos);
  CHECK(report.find("pot-only model") != std::string::npos);
  CHECK(report.find("cot-then-pot model") != std::string::npos);
  // One verdict line per section, consistent with the shared scoring path.
  std::size_t verdicts = 0, pos = 0;
  while ((pos = report.find("verdict: ", pos)) != std::string::npos) {
    ++verdicts;
    pos += 1;
  }
  CHECK(verdicts == 3);

  ProblemScore direct =
      score_problem(m1, problems[0], Mode::Cot, vocab);
  std::string expected = direct.correct
                             ? "verdict: correct"
                             : std::string("verdict: ") +
                                   failure_name(*direct.failure);
  CHECK(report.find(expected) != std::string::npos);
}

TEST_CASE("ablation table rendering and csv are stable") {
  std::vector<AblationRun> runs;
  for (std::uint64_t seed : {1, 2, 3}) {
    AblationRun r;
    r.strategy = "cot-then-pot";
    r.seed = seed;
    r.primary_mode = "pot";
    r.accuracy = 0.5 + 0.01 * static_cast<double>(seed);
    ForgettingProbe probe;
    probe.cot_accuracy_after_phase1 = 0.4;
    probe.cot_accuracy_after_phase2 = 0.35;
    probe.delta = -0.05;
    r.probe = probe;
    runs.push_back(r);
    AblationRun p = r;
    p.strategy = "pot-only";
    p.probe.reset();
    p.accuracy = 0.45;
    runs.push_back(p);
  }
  std::string table = render_ablation_table(runs);
  CHECK(table.find("cot-then-pot") != std::string::npos);
  CHECK(table.find("pot-only") != std::string::npos);
  CHECK(table.find("0.520 +- 0.010") != std::string::npos);
  CHECK(render_ablation_table(runs) == table);

  auto dir = std::filesystem::temp_directory_path() / "cotpot_abl_test";
  std::filesystem::create_directories(dir);
  write_ablation_csv(runs, (dir / "ablation.csv").string());
  std::ifstream in(dir / "ablation.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# cotpot-ablation v1");
  int rows = 0;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 6);
  std::filesystem::remove_all(dir);
}
