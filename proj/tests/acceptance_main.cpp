// Acceptance suite: one injectable criterion per invocation, one pass/fail
// line each, tolerances pinned in code. Criteria 5 and 6 share one sweep.
//
//   cotpot_acceptance --criterion <1..10> --cli <path-to-cotpot>

#include <malloc.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cotpot/checkpoint.hpp"
#include "cotpot/curriculum.hpp"
#include "cotpot/eval.hpp"
#include "cotpot/minilang.hpp"
#include "cotpot/model.hpp"
#include "cotpot/problem_gen.hpp"
#include "cotpot/rng.hpp"
#include "cotpot/synth.hpp"
#include "cotpot/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace cotpot;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli;
fs::path g_work;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int run_cli(const std::string& args) {
  std::string cmd = g_cli + " " + args + " > " +
                    (g_work / "cli_log.txt").string() + " 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Independent fold over a problem's symbolic chain with plain rational
// arithmetic: the oracle the interpreter is checked against.
Rational chain_oracle(const problem_gen::Problem& p) {
  std::vector<Rational> vals;
  Rational current = p.entities.front().second;
  for (const auto& s : p.steps) {
    Rational lhs = s.lhs_ref < 0 ? p.entities.front().second
                                 : vals[static_cast<std::size_t>(s.lhs_ref)];
    Rational rhs = s.rhs_ref
                       ? (*s.rhs_ref < 0
                              ? p.entities.front().second
                              : vals[static_cast<std::size_t>(*s.rhs_ref)])
                       : s.rhs_const;
    switch (s.op) {
      case problem_gen::Op::Add: current = lhs + rhs; break;
      case problem_gen::Op::Sub: current = lhs - rhs; break;
      case problem_gen::Op::Mul: current = lhs * rhs; break;
      case problem_gen::Op::Div: current = lhs / rhs; break;
    }
    vals.push_back(current);
  }
  return current;
}

// ---- criterion 1: gradients vs central finite differences -------------------

bool criterion_1() {
  auto start = Clock::now();
  model::ModelConfig cfg;
  cfg.vocab_size = 48;
  cfg.d_model = 24;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.d_ff = 48;
  cfg.max_seq_len = 16;
  cfg.init_seed = 2024;
  model::Parameters params = model::init_params(cfg);

  Rng rng(71);
  model::Batch batch;
  batch.batch = 2;
  batch.seq = 12;
  batch.ids.resize(24);
  for (auto& id : batch.ids) {
    id = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size)));
  }
  batch.lengths = {12, 9};
  std::vector<int> targets(24);
  std::vector<std::uint8_t> mask(24, 0);
  for (std::size_t i = 0; i < 24; ++i) {
    targets[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size)));
    mask[i] = rng.bernoulli(0.7) ? 1 : 0;
  }
  mask[2] = 1;

  model::ForwardTrace trace;
  model::Tensor logits = model::forward_logits(params, batch, &trace);
  model::LossGrad lg = model::nll_loss_grad(logits, targets, mask);
  model::Gradients grads = model::backward(params, trace, lg.dlogits);

  std::vector<model::Tensor*> pt;
  params.visit([&](const std::string&, model::Tensor& t) { pt.push_back(&t); });
  std::vector<const model::Tensor*> gt;
  grads.visit([&](const std::string&, const model::Tensor& t) {
    gt.push_back(&t);
  });
  auto loss_now = [&]() {
    return model::nll_loss(model::forward_logits(params, batch), targets, mask);
  };

  const double h = 1e-4;
  double max_rel = 0.0;
  Rng pick(72);
  const int probes = 240;
  for (int i = 0; i < probes; ++i) {
    std::size_t which = pick.below(pt.size());
    std::size_t idx = pick.below(pt[which]->size());
    double saved = pt[which]->v[idx];
    pt[which]->v[idx] = saved + h;
    double up = loss_now();
    pt[which]->v[idx] = saved - h;
    double down = loss_now();
    pt[which]->v[idx] = saved;
    double fd = (up - down) / (2.0 * h);
    double an = gt[which]->v[idx];
    double rel =
        std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  double elapsed = seconds_since(start);
  bool ok = max_rel < 1e-4 && elapsed < 60.0;
  std::printf(
      "[%s] criterion 1: finite-difference gradient check, %d coordinates, "
      "max relative error %.3g (< 1e-4), %.1fs (< 60s)\n",
      ok ? "PASS" : "FAIL", probes, max_rel, elapsed);
  return ok;
}

// ---- criterion 2: interpreter vs the symbolic-chain oracle ------------------

bool criterion_2() {
  auto start = Clock::now();
  int agree = 0;
  const int total = 1000;
  for (int i = 0; i < total; ++i) {
    problem_gen::ProblemSpec spec;
    spec.step_count = 1 + i % 8;
    spec.magnitude = i % 3 == 0 ? problem_gen::Magnitude::Large
                                : problem_gen::Magnitude::Small;
    spec.rational_division = i % 4 == 0;
    spec.template_family = i % problem_gen::template_family_count();
    spec.seed = 60000 + static_cast<std::uint64_t>(i) * 11;
    problem_gen::Problem p = problem_gen::generate_problem(spec);
    auto result = minilang::run(p.pot.text);
    if (result.ok() && result.value() == chain_oracle(p)) ++agree;
  }

  // Injected error programs, one per typed error class.
  using minilang::ErrorKind;
  const std::vector<std::pair<std::string, ErrorKind>> bad = {
      {"answer 1 @ 2;", ErrorKind::Lex},
      {"let a = * 2; answer a;", ErrorKind::Parse},
      {"let a = 1;", ErrorKind::MissingAnswer},
      {"answer 1; let a = 2;", ErrorKind::TrailingStatements},
      {"answer ghost;", ErrorKind::UndefinedVariable},
      {"let z = 0; answer 4 / z;", ErrorKind::DivisionByZero},
      {"let a = 1; let a = 2; answer a;", ErrorKind::Redefinition},
  };
  int typed_ok = 0;
  for (const auto& [src, kind] : bad) {
    auto r = minilang::run(src);
    if (!r.ok() && r.error().kind == kind) ++typed_ok;
  }
  minilang::EvalLimits tight;
  tight.max_statements = 2;
  auto too_long = minilang::run("let a=1; let b=2; let c=3; answer a;", tight);
  if (!too_long.ok() && too_long.error().kind == ErrorKind::LimitExceeded) {
    ++typed_ok;
  }
  minilang::EvalLimits digits;
  digits.max_digits = 4;
  auto too_big = minilang::run("answer 99999 * 99999;", digits);
  if (!too_big.ok() && too_big.error().kind == ErrorKind::LimitExceeded) {
    ++typed_ok;
  }
  const int typed_total = static_cast<int>(bad.size()) + 2;

  double elapsed = seconds_since(start);
  bool ok = agree == total && typed_ok == typed_total && elapsed < 10.0;
  std::printf(
      "[%s] criterion 2: interpreter oracle equivalence %d/%d, typed errors "
      "%d/%d, %.2fs (< 10s)\n",
      ok ? "PASS" : "FAIL", agree, total, typed_ok, typed_total, elapsed);
  return ok;
}

// ---- criterion 3: causality and loss masking --------------------------------

bool criterion_3() {
  model::ModelConfig cfg;
  cfg.vocab_size = 32;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.d_ff = 32;
  cfg.max_seq_len = 16;
  cfg.init_seed = 3001;
  model::Parameters params = model::init_params(cfg);
  Rng rng(73);

  int leak_free = 0, mask_inert = 0;
  const int batches = 100;
  for (int trial = 0; trial < batches; ++trial) {
    model::Batch batch;
    batch.batch = 2;
    batch.seq = 12;
    batch.ids.resize(24);
    for (auto& id : batch.ids) {
      id = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size)));
    }
    batch.lengths = {12, 12};

    // Perturb one position; logits strictly before it must be unchanged.
    model::Tensor base = model::forward_logits(params, batch);
    const int t = 1 + static_cast<int>(rng.below(11));
    model::Batch perturbed = batch;
    for (int r = 0; r < 2; ++r) {
      int& id = perturbed.ids[static_cast<std::size_t>(r) * 12 + t];
      id = (id + 1) % cfg.vocab_size;
    }
    model::Tensor changed = model::forward_logits(params, perturbed);
    bool no_leak = true;
    for (int r = 0; r < 2 && no_leak; ++r) {
      for (int pos = 0; pos < t && no_leak; ++pos) {
        const int row = r * 12 + pos;
        if (std::memcmp(&base.at(row, 0), &changed.at(row, 0),
                        sizeof(double) * static_cast<std::size_t>(cfg.vocab_size)) != 0) {
          no_leak = false;
        }
      }
    }
    if (no_leak) ++leak_free;

    // Question-region (masked) targets must not touch the loss.
    std::vector<int> targets(24);
    std::vector<std::uint8_t> mask(24, 0);
    for (std::size_t i = 0; i < 24; ++i) {
      targets[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size)));
      mask[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    mask[5] = 1;
    double loss_a = model::nll_loss(base, targets, mask);
    std::vector<int> altered = targets;
    for (std::size_t i = 0; i < 24; ++i) {
      if (!mask[i]) altered[i] = (targets[i] + 3) % cfg.vocab_size;
    }
    double loss_b = model::nll_loss(base, altered, mask);
    if (loss_a == loss_b) ++mask_inert;
  }
  bool ok = leak_free == batches && mask_inert == batches;
  std::printf(
      "[%s] criterion 3: zero future-position leakage %d/%d batches, zero "
      "masked-target sensitivity %d/%d batches\n",
      ok ? "PASS" : "FAIL", leak_free, batches, mask_inert, batches);
  return ok;
}

// ---- criterion 4: overfit sanity ---------------------------------------------

bool criterion_4() {
  auto start = Clock::now();
  // 32 problems x both rationale formats = 64 training examples.
  std::vector<problem_gen::Problem> problems;
  for (int i = 0; i < 32; ++i) {
    problem_gen::ProblemSpec spec;
    spec.step_count = 1 + i % 2;
    spec.seed = 90000 + static_cast<std::uint64_t>(i) * 17;
    spec.template_family = i % problem_gen::template_family_count();
    problems.push_back(problem_gen::generate_problem(spec));
  }
  std::vector<std::string> corpus;
  for (const auto& p : problems) {
    corpus.push_back(p.question);
    corpus.push_back(p.cot.text);
    corpus.push_back(p.pot.text);
  }
  for (auto& w : problem_gen::grammar_lexicon()) corpus.push_back(w);
  tok::Vocab vocab = tok::Vocab::build(corpus);

  std::vector<tok::EncodedExample> examples;
  int max_len = 0;
  for (const auto& p : problems) {
    examples.push_back(tok::encode(vocab, p, p.cot));
    examples.push_back(tok::encode(vocab, p, p.pot));
    for (const auto& ex : {examples[examples.size() - 2], examples.back()}) {
      max_len = std::max(max_len, static_cast<int>(ex.ids.size()));
    }
  }

  model::ModelConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.d_model = 64;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.d_ff = 256;
  cfg.max_seq_len = max_len + 8;
  cfg.init_seed = 4001;

  curriculum::TrainConfig train;
  train.peak_lr = 1.5e-3;
  train.warmup_fraction = 0.03;
  train.batch_size = 16;
  train.epochs_per_phase = 500;  // 4 steps/epoch -> 2000 optimizer steps
  train.seed = 4002;

  model::Parameters params = model::init_params(cfg);
  curriculum::TrainPhaseResult result =
      curriculum::train_phase(std::move(params), examples, train);
  const long steps = static_cast<long>(result.curve.size());

  int exact = 0;
  for (const auto& ex : examples) {
    // Prompt = everything through the mode tag; check the continuation
    // reproduces the rationale and EOS token for token.
    std::size_t prompt_len = 0;
    while (prompt_len < ex.loss_mask.size() && !ex.loss_mask[prompt_len]) {
      ++prompt_len;
    }
    std::vector<int> prompt(ex.ids.begin(),
                            ex.ids.begin() + static_cast<long>(prompt_len));
    std::vector<int> decoded = model::greedy_decode(
        result.params, prompt,
        static_cast<int>(ex.ids.size() - prompt_len) + 4, tok::kEos);
    if (decoded == ex.ids) ++exact;
  }
  double elapsed = seconds_since(start);
  bool ok = exact >= 61 && steps <= 2000;  // 61/64 = 95.3%
  std::printf(
      "[%s] criterion 4: overfit sanity %d/64 exact-sequence decodes "
      "(>= 61) after %ld optimizer steps (<= 2000), %.0fs\n",
      ok ? "PASS" : "FAIL", exact, steps, elapsed);
  return ok;
}

// ---- criteria 5 and 6: the strategy sweep ------------------------------------

struct SweepRow {
  std::string strategy;
  std::uint64_t seed;
  double accuracy;
  bool has_probe = false;
  double probe_delta = 0.0;
};

std::vector<SweepRow> parse_ablation_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<SweepRow> rows;
  std::string line;
  std::getline(in, line);  // schema
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    SweepRow row;
    std::getline(ls, row.strategy, ',');
    std::getline(ls, field, ',');
    row.seed = std::stoull(field);
    std::getline(ls, field, ',');  // primary mode
    std::getline(ls, field, ',');
    row.accuracy = std::stod(field);
    std::getline(ls, field, ',');  // probe phase1
    std::getline(ls, field, ',');  // probe phase2
    if (std::getline(ls, field) && !field.empty()) {
      row.has_probe = true;
      row.probe_delta = std::stod(field);
    }
    rows.push_back(row);
  }
  return rows;
}

const SweepRow* find_row(const std::vector<SweepRow>& rows,
                         const std::string& strategy, std::uint64_t seed) {
  for (const auto& r : rows) {
    if (r.strategy == strategy && r.seed == seed) return &r;
  }
  return nullptr;
}

// bucket -> (correct, total) from a run's eval.csv
std::map<std::string, std::pair<long, long>> parse_eval_buckets(
    const fs::path& path) {
  std::ifstream in(path);
  std::map<std::string, std::pair<long, long>> out;
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string dataset, mode, bucket, correct, total;
    std::getline(ls, dataset, ',');
    std::getline(ls, mode, ',');
    std::getline(ls, bucket, ',');
    std::getline(ls, correct, ',');
    std::getline(ls, total, ',');
    if (bucket.rfind("fail:", 0) == 0) continue;
    out[bucket] = {std::stol(correct), std::stol(total)};
  }
  return out;
}

bool criterion_5_and_6() {
  auto start = Clock::now();
  fs::path out_dir = g_work / "sweep";
  const std::string base =
      "--set run.out_dir=" + out_dir.string() + " ";
  // The default desk-scale configuration drives the whole sweep; only the
  // output directory is redirected.
  if (!fs::exists(out_dir / "data/corpus.jsonl")) {
    if (run_cli(base + "gen-data") != 0 || run_cli(base + "synth") != 0) {
      std::printf("[FAIL] criterion 5: data pipeline failed (%s)\n",
                  slurp(g_work / "cli_log.txt").c_str());
      return false;
    }
  }
  if (run_cli(base + "ablate") != 0) {
    std::printf("[FAIL] criterion 5: ablate failed (%s)\n",
                slurp(g_work / "cli_log.txt").c_str());
    return false;
  }
  auto rows = parse_ablation_csv(out_dir / "ablation.csv");
  const std::vector<std::uint64_t> seeds = {1, 2, 3};

  struct Ordering {
    const char* label;
    int wins = 0;
    std::string detail;
  };
  Ordering a{"(a) cot-then-pot > pot-only"};
  Ordering b{"(b) cot-then-pot >= mixed"};
  Ordering c{"(c) retention softens the forgetting drop"};
  Ordering d{"(d) pot-then-cot-no-retention < mixed"};

  for (std::uint64_t seed : seeds) {
    const SweepRow* saas = find_row(rows, "cot-then-pot", seed);
    const SweepRow* pot = find_row(rows, "pot-only", seed);
    const SweepRow* mixed = find_row(rows, "mixed", seed);
    const SweepRow* saas_nr = find_row(rows, "cot-then-pot-no-retention", seed);
    const SweepRow* rev_nr = find_row(rows, "pot-then-cot-no-retention", seed);
    if (!saas || !pot || !mixed || !saas_nr || !rev_nr) {
      std::printf("[FAIL] criterion 5: ablation.csv is missing rows\n");
      return false;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), " seed %llu: %+.3f",
                  static_cast<unsigned long long>(seed),
                  saas->accuracy - pot->accuracy);
    a.detail += buf;
    if (saas->accuracy > pot->accuracy) a.wins++;
    std::snprintf(buf, sizeof(buf), " seed %llu: %+.3f",
                  static_cast<unsigned long long>(seed),
                  saas->accuracy - mixed->accuracy);
    b.detail += buf;
    if (saas->accuracy >= mixed->accuracy) b.wins++;
    std::snprintf(buf, sizeof(buf), " seed %llu: %+.3f",
                  static_cast<unsigned long long>(seed),
                  saas->probe_delta - saas_nr->probe_delta);
    c.detail += buf;
    if (saas->has_probe && saas_nr->has_probe &&
        saas->probe_delta >= saas_nr->probe_delta) {
      c.wins++;
    }
    std::snprintf(buf, sizeof(buf), " seed %llu: %+.3f",
                  static_cast<unsigned long long>(seed),
                  rev_nr->accuracy - mixed->accuracy);
    d.detail += buf;
    if (rev_nr->accuracy < mixed->accuracy) d.wins++;
  }

  bool pass5 = true;
  for (const Ordering* o : {&a, &b, &c, &d}) {
    bool ok = o->wins >= 2;
    if (!ok) pass5 = false;
    std::printf("  %s %s: %d/3 seeds;%s\n", ok ? "ok  " : "VIOLATED",
                o->label, o->wins, o->detail.c_str());
  }
  double elapsed5 = seconds_since(start);
  std::printf(
      "[%s] criterion 5: curriculum-direction orderings hold in >= 2 of 3 "
      "seeds (%.0fs)\n",
      pass5 ? "PASS" : "FAIL", elapsed5);

  // Criterion 6 reads per-step buckets from the per-run eval files.
  double gap1 = 0.0, gap4 = 0.0;
  bool have_buckets = true;
  for (std::uint64_t seed : seeds) {
    auto saas_buckets = parse_eval_buckets(
        out_dir / ("runs/cot-then-pot-seed" + std::to_string(seed)) /
        "eval.csv");
    auto pot_buckets = parse_eval_buckets(
        out_dir / ("runs/pot-only-seed" + std::to_string(seed)) / "eval.csv");
    for (const char* bucket : {"1", "4+"}) {
      if (!saas_buckets.count(bucket) || !pot_buckets.count(bucket) ||
          saas_buckets[bucket].second == 0 || pot_buckets[bucket].second == 0) {
        have_buckets = false;
      }
    }
    if (!have_buckets) break;
    auto acc = [](std::pair<long, long> cell) {
      return static_cast<double>(cell.first) / static_cast<double>(cell.second);
    };
    gap1 += (acc(saas_buckets["1"]) - acc(pot_buckets["1"])) / 3.0;
    gap4 += (acc(saas_buckets["4+"]) - acc(pot_buckets["4+"])) / 3.0;
  }
  bool pass6 = have_buckets && gap4 >= gap1;
  std::printf(
      "[%s] criterion 6: mean curriculum-vs-program gap by difficulty, "
      "4+ steps %+.3f >= 1 step %+.3f\n",
      pass6 ? "PASS" : "FAIL", gap4, gap1);
  return pass5 && pass6;
}

// ---- criterion 7: pipeline conservation --------------------------------------

bool criterion_7() {
  std::vector<problem_gen::Problem> problems;
  for (int i = 0; i < 1250; ++i) {
    problem_gen::ProblemSpec spec;
    spec.step_count = 1 + i % 6;
    spec.seed = 70000 + static_cast<std::uint64_t>(i) * 7;
    spec.template_family = i % problem_gen::template_family_count();
    problems.push_back(problem_gen::generate_problem(spec));
  }
  synth::TeacherConfig teacher;
  teacher.candidates_per_problem = 4;  // 1250 x 4 x 2 modes = 10,000
  teacher.arithmetic_error_prob = 0.15;
  teacher.step_deletion_prob = 0.05;
  teacher.lexical_jitter_prob = 0.4;
  teacher.seed = 7007;
  auto [pairs, report] = synth::build_corpus(problems, teacher, 0.7);

  bool identities = report.total.generated == 10000;
  for (const auto& [mode, c] : report.per_mode) {
    identities = identities &&
                 c.generated == c.verified_correct + c.rejected_wrong +
                                    c.rejected_invalid &&
                 c.kept == c.verified_correct - c.removed_duplicates;
  }
  identities = identities &&
               report.total.generated ==
                   report.total.verified_correct + report.total.rejected_wrong +
                       report.total.rejected_invalid &&
               report.total.kept == report.total.verified_correct -
                                        report.total.removed_duplicates;

  // Dedup idempotence over the surviving candidates.
  std::vector<synth::Candidate> kept;
  for (const auto& pair : pairs) {
    kept.push_back({problems[pair.problem_index].id, pair.rationale.mode,
                    pair.rationale.text,
                    {},
                    false});
  }
  auto once = synth::dedup(kept, 0.7);
  auto twice = synth::dedup(once, 0.7);
  bool idempotent = once.size() == kept.size() && once.size() == twice.size();
  for (std::size_t i = 0; idempotent && i < once.size(); ++i) {
    idempotent = once[i].text == twice[i].text;
  }

  bool ok = identities && idempotent;
  std::printf(
      "[%s] criterion 7: filter-report identities on %ld candidates "
      "(correct %ld, wrong %ld, invalid %ld, duplicates %ld, kept %ld), "
      "dedup idempotent: %s\n",
      ok ? "PASS" : "FAIL", report.total.generated,
      report.total.verified_correct, report.total.rejected_wrong,
      report.total.rejected_invalid, report.total.removed_duplicates,
      report.total.kept, idempotent ? "yes" : "no");
  return ok;
}

// ---- criterion 8: retention arithmetic ----------------------------------------

bool criterion_8() {
  auto fake = [](int n, problem_gen::Mode mode) {
    std::vector<tok::EncodedExample> out;
    for (int i = 0; i < n; ++i) {
      tok::EncodedExample ex;
      ex.mode = mode;
      ex.problem_id = std::to_string(i);
      ex.ids = {tok::kBos, tok::kQuestion, 9, 9,
                mode == problem_gen::Mode::Cot ? tok::kCotTag : tok::kPotTag,
                8, tok::kEos};
      ex.loss_mask = {0, 0, 0, 0, 0, 1, 1};
      out.push_back(ex);
    }
    return out;
  };
  auto d_cot = fake(1000, problem_gen::Mode::Cot);
  curriculum::StrategySpec saas{curriculum::Strategy::CotThenPot, true};

  struct Case {
    int pot_size;
    double fraction;
    std::size_t expected;
  };
  const Case cases[] = {{500, 0.2, 600}, {500, 0.0, 500}, {10, 1.0, 20}};
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    auto d_pot = fake(c.pot_size, problem_gen::Mode::Pot);
    curriculum::RetentionConfig retention;
    retention.fraction = c.fraction;
    retention.seed = 1;
    auto plan =
        curriculum::build_phase_plan(saas, d_cot, d_pot, retention, 1);
    std::size_t got = plan.phases[1].dataset.size();
    char buf[96];
    std::snprintf(buf, sizeof(buf), " (|D_pot|=%d, rho=%.1f) -> %zu", c.pot_size,
                  c.fraction, got);
    detail += buf;
    if (got != c.expected) ok = false;
  }
  std::printf("[%s] criterion 8: phase-2 sizes exactly {600, 500, 20};%s\n",
              ok ? "PASS" : "FAIL", detail.c_str());
  return ok;
}

// ---- criterion 9: schedule checks ----------------------------------------------

bool criterion_9() {
  curriculum::TrainConfig cfg;
  cfg.peak_lr = 3e-4;
  cfg.warmup_fraction = 0.1;
  const long total = 2000;
  const long warmup = 200;
  const long midpoint = warmup + (total - warmup) / 2;

  double at_warmup = curriculum::lr_at(warmup, total, cfg);
  double at_end = curriculum::lr_at(total, total, cfg);
  double at_mid = curriculum::lr_at(midpoint, total, cfg);
  bool ok = std::abs(at_warmup - cfg.peak_lr) <= 1e-12 &&
            std::abs(at_end) <= 1e-12 &&
            std::abs(at_mid - cfg.peak_lr / 2) <= 1e-12;
  std::printf(
      "[%s] criterion 9: lr(warmup)=%.17g (peak %.17g), lr(end)=%.17g, "
      "lr(midpoint)=%.17g (peak/2=%.17g), all within 1e-12\n",
      ok ? "PASS" : "FAIL", at_warmup, cfg.peak_lr, at_end, at_mid,
      cfg.peak_lr / 2);
  return ok;
}

// ---- criterion 10: byte-identical reruns ----------------------------------------

bool criterion_10() {
  auto start = Clock::now();
  auto run_pipeline = [&](const fs::path& out_dir) -> bool {
    std::string base =
        "--set run.out_dir=" + out_dir.string() +
        " --set problems.train_size=80 --set problems.held_out_size=16"
        " --set problems.step_counts=1,2,3 --set model.d_model=16"
        " --set model.n_layers=1 --set model.n_heads=2 --set model.d_ff=32"
        " --set model.max_seq_len=160 --set train.epochs_per_phase=1"
        " --set train.batch_size=16 --set ablate.seeds=1"
        " --set ablate.strategies=pot-only,cot-then-pot"
        " --set run.master_seed=33 ";
    if (run_cli(base + "gen-data") != 0) return false;
    if (run_cli(base + "synth") != 0) return false;
    if (run_cli(base + "ablate") != 0) return false;
    if (run_cli(base + "eval --run-dir " +
                (out_dir / "runs/cot-then-pot-seed1").string() +
                " --manifest " +
                (out_dir / "data/held_out.manifest").string() +
                " --mode pot") != 0) {
      return false;
    }
    return true;
  };
  fs::path dir_a = g_work / "repro_a";
  fs::path dir_b = g_work / "repro_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  if (!run_pipeline(dir_a) || !run_pipeline(dir_b)) {
    std::printf("[FAIL] criterion 10: pipeline execution failed (%s)\n",
                slurp(g_work / "cli_log.txt").c_str());
    return false;
  }
  struct FileCheck {
    const char* label;
    fs::path rel;
  };
  const FileCheck files[] = {
      {"losses.csv", fs::path("runs/cot-then-pot-seed1/losses.csv")},
      {"eval.csv", fs::path("runs/cot-then-pot-seed1/eval.csv")},
      {"ablation.csv", fs::path("ablation.csv")},
  };
  bool ok = true;
  std::string detail;
  for (const FileCheck& f : files) {
    bool same = slurp(dir_a / f.rel) == slurp(dir_b / f.rel) &&
                !slurp(dir_a / f.rel).empty();
    detail += std::string(" ") + f.label + (same ? "=identical" : "=DIFFERS");
    if (!same) ok = false;
  }
  std::printf(
      "[%s] criterion 10: two full CLI pipeline executions under one master "
      "seed;%s (%.0fs)\n",
      ok ? "PASS" : "FAIL", detail.c_str(), seconds_since(start));
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);
  int criterion = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0) criterion = std::atoi(argv[i + 1]);
    if (std::strcmp(argv[i], "--cli") == 0) g_cli = argv[i + 1];
  }
  if (criterion < 1 || criterion > 10) {
    std::fprintf(stderr,
                 "usage: cotpot_acceptance --criterion <1..10> --cli <path>\n");
    return 2;
  }
  g_work = fs::absolute("acceptance_work");
  fs::create_directories(g_work);

  bool ok = false;
  switch (criterion) {
    case 1: ok = criterion_1(); break;
    case 2: ok = criterion_2(); break;
    case 3: ok = criterion_3(); break;
    case 4: ok = criterion_4(); break;
    case 5:
    case 6: ok = criterion_5_and_6(); break;
    case 7: ok = criterion_7(); break;
    case 8: ok = criterion_8(); break;
    case 9: ok = criterion_9(); break;
    case 10: ok = criterion_10(); break;
  }
  return ok ? 0 : 1;
}
