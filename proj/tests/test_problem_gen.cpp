#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "cotpot/minilang.hpp"
#include "cotpot/problem_gen.hpp"

using namespace cotpot;
using namespace cotpot::problem_gen;

namespace {

ProblemSpec spec_with(int steps, std::uint64_t seed,
                      Magnitude mag = Magnitude::Small) {
  ProblemSpec s;
  s.step_count = steps;
  s.magnitude = mag;
  s.seed = seed;
  s.template_family = static_cast<int>(seed % template_family_count());
  return s;
}

// Independent fold over the symbolic chain using plain rational arithmetic.
Rational chain_oracle(const Problem& p) {
  std::vector<Rational> vals;
  Rational current = p.entities.front().second;
  for (const SymbolicStep& s : p.steps) {
    Rational lhs = s.lhs_ref < 0 ? p.entities.front().second
                                 : vals[static_cast<std::size_t>(s.lhs_ref)];
    Rational rhs = s.rhs_ref
                       ? (*s.rhs_ref < 0
                              ? p.entities.front().second
                              : vals[static_cast<std::size_t>(*s.rhs_ref)])
                       : s.rhs_const;
    switch (s.op) {
      case Op::Add: current = lhs + rhs; break;
      case Op::Sub: current = lhs - rhs; break;
      case Op::Mul: current = lhs * rhs; break;
      case Op::Div: current = lhs / rhs; break;
    }
    vals.push_back(current);
  }
  return current;
}

int count_reasoning_lines(const std::string& cot_text) {
  int lines = 0;
  std::size_t start = 0;
  while (start < cot_text.size()) {
    auto end = cot_text.find('\n', start);
    std::string line = cot_text.substr(
        start, end == std::string::npos ? std::string::npos : end - start);
    if (line.rfind("####", 0) != 0 && !line.empty()) ++lines;
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return lines;
}

}  // namespace

TEST_CASE("generation is deterministic in the spec") {
  auto a = generate_problem(spec_with(4, 42));
  auto b = generate_problem(spec_with(4, 42));
  CHECK(a.question == b.question);
  CHECK(a.cot.text == b.cot.text);
  CHECK(a.pot.text == b.pot.text);
  CHECK(a.answer == b.answer);
  CHECK(a.id == b.id);

  auto c = generate_problem(spec_with(4, 43));
  CHECK(a.question != c.question);
}

TEST_CASE("spec validation") {
  ProblemSpec bad = spec_with(0, 1);
  CHECK_THROWS_AS(generate_problem(bad), InvalidSpec);
  bad = spec_with(9, 1);
  CHECK_THROWS_AS(generate_problem(bad), InvalidSpec);
  bad = spec_with(2, 1);
  bad.allowed_ops.clear();
  CHECK_THROWS_AS(generate_problem(bad), InvalidSpec);
}

TEST_CASE("requested step count is always realized") {
  for (int k = 1; k <= 8; ++k) {
    std::map<int, int> dist;
    for (int i = 0; i < 125; ++i) {
      auto p = generate_problem(spec_with(k, 1000 + static_cast<std::uint64_t>(i) * 7 + k));
      dist[p.step_count] += 1;
      CHECK(p.step_count == static_cast<int>(p.steps.size()));
    }
    CHECK(dist.size() == 1);
    CHECK(dist[k] == 125);
  }
}

TEST_CASE("problems are self-consistent in both formats") {
  for (int i = 0; i < 300; ++i) {
    Magnitude mag = i % 4 == 0 ? Magnitude::Large : Magnitude::Small;
    auto spec = spec_with(1 + i % 6, 9000 + static_cast<std::uint64_t>(i), mag);
    spec.rational_division = i % 5 == 0;
    Problem p = generate_problem(spec);

    CHECK(p.answer == p.steps.back().result);
    CHECK(p.answer == chain_oracle(p));

    // The program format reproduces the answer through the interpreter.
    auto run = minilang::run(p.pot.text);
    REQUIRE(run.ok());
    CHECK(run.value() == p.answer);

    // The prose format ends with a sentinel that parses to the answer.
    auto pos = p.cot.text.rfind("####");
    REQUIRE(pos != std::string::npos);
    auto value = Rational::parse(p.cot.text.substr(pos + 4));
    REQUIRE(value.has_value());
    CHECK(*value == p.answer);

    CHECK(count_reasoning_lines(p.cot.text) == p.step_count);
  }
}

TEST_CASE("exact division keeps integer chains when the flag is off") {
  for (int i = 0; i < 120; ++i) {
    ProblemSpec spec = spec_with(5, 500 + static_cast<std::uint64_t>(i));
    spec.allowed_ops = {Op::Add, Op::Div, Op::Mul};
    spec.rational_division = false;
    Problem p = generate_problem(spec);
    for (const auto& s : p.steps) CHECK(s.result.is_integer());
  }
}

TEST_CASE("render variants stay faithful to the chain") {
  Problem p = generate_problem(spec_with(3, 77));
  for (int v = 0; v < kRenderVariants; ++v) {
    auto pot = render_pot(p, v);
    auto run = minilang::run(pot.text);
    REQUIRE(run.ok());
    CHECK(run.value() == p.answer);
    auto cot = render_cot(p, v);
    auto pos = cot.text.rfind("####");
    CHECK(*Rational::parse(cot.text.substr(pos + 4)) == p.answer);
  }
  CHECK(render_cot(p, 0).text != render_cot(p, 1).text);
}

TEST_CASE("dataset assembly") {
  GenConfig cfg;
  cfg.train_size = 0;
  cfg.held_out_size = 10;
  cfg.master_seed = 5;
  Dataset ds = generate_dataset(cfg);
  CHECK(ds.train.empty());
  CHECK(ds.train_manifest.problem_ids.empty());
  CHECK(ds.held_out.size() == 10);

  cfg.train_size = 500;
  cfg.held_out_size = 100;
  Dataset big = generate_dataset(cfg);
  std::set<std::string> ids;
  for (const auto& p : big.train) ids.insert(p.id);
  for (const auto& p : big.held_out) ids.insert(p.id);
  CHECK(ids.size() == 600);

  // Counts per mode sum to the split size.
  for (const auto& [mode, per_step] : big.train_manifest.counts) {
    long total = 0;
    for (const auto& [step, n] : per_step) total += n;
    CHECK(total == 500);
  }

  Dataset again = generate_dataset(cfg);
  CHECK(again.train_manifest.problem_ids == big.train_manifest.problem_ids);
  CHECK(again.held_out_manifest.problem_ids ==
        big.held_out_manifest.problem_ids);
  CHECK(again.train_manifest.config_hash == big.train_manifest.config_hash);
}

TEST_CASE("problem and manifest files round trip") {
  GenConfig cfg;
  cfg.train_size = 12;
  cfg.held_out_size = 3;
  cfg.master_seed = 11;
  Dataset ds = generate_dataset(cfg);

  auto dir = std::filesystem::temp_directory_path() / "cotpot_pg_test";
  std::filesystem::create_directories(dir);
  std::string records = (dir / "train.jsonl").string();
  std::string manifest = (dir / "train.manifest").string();
  save_problems(ds.train, records);
  save_manifest(ds.train_manifest, manifest);

  auto loaded = load_problems(records);
  REQUIRE(loaded.size() == ds.train.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].id == ds.train[i].id);
    CHECK(loaded[i].question == ds.train[i].question);
    CHECK(loaded[i].answer == ds.train[i].answer);
    CHECK(loaded[i].cot.text == ds.train[i].cot.text);
    CHECK(loaded[i].pot.text == ds.train[i].pot.text);
  }
  auto m = load_manifest(manifest);
  CHECK(m.problem_ids == ds.train_manifest.problem_ids);
  CHECK(m.counts == ds.train_manifest.counts);
  CHECK(m.config_hash == ds.train_manifest.config_hash);
  std::filesystem::remove_all(dir);
}
