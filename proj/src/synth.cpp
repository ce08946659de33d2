#include "cotpot/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cotpot/kernels.hpp"
#include "cotpot/minilang.hpp"
#include "cotpot/rng.hpp"

namespace cotpot::synth {

using problem_gen::Mode;
using problem_gen::Op;
using problem_gen::Problem;
using problem_gen::Rationale;
using problem_gen::SymbolicStep;

void TeacherConfig::validate() const {
  if (candidates_per_problem < 1) {
    throw std::invalid_argument("candidates_per_problem must be >= 1");
  }
  for (double p :
       {arithmetic_error_prob, step_deletion_prob, lexical_jitter_prob}) {
    if (p < 0.0 || p > 1.0) {
      throw std::invalid_argument("corruption probabilities must be in [0, 1]");
    }
  }
}

TeacherConfig TeacherConfig::from_temperature(double temperature, int k,
                                              std::uint64_t seed) {
  if (temperature < 0.0 || temperature > 1.0) {
    throw std::invalid_argument("temperature must be in [0, 1]");
  }
  TeacherConfig t;
  t.candidates_per_problem = k;
  t.arithmetic_error_prob = 0.2 * temperature;
  t.step_deletion_prob = 0.1 * temperature;
  t.lexical_jitter_prob = std::min(1.0, 0.8 * temperature);
  t.seed = seed;
  return t;
}

// ---- the noisy teacher -------------------------------------------------------

namespace {

const Rational& patched_value(const Problem& p, int ref) {
  if (ref < 0) return p.entities.front().second;
  return p.steps[static_cast<std::size_t>(ref)].result;
}

Op flip_op(Op op, Rng& rng) {
  switch (op) {
    case Op::Add: return Op::Sub;
    case Op::Sub: return Op::Add;
    case Op::Mul: return Op::Div;
    case Op::Div: return Op::Mul;
  }
  (void)rng;
  return op;
}

// Applies per-step corruptions to a copy of the gold chain and recomputes the
// downstream values, mirroring a teacher that keeps reasoning from its own
// mistake. Deleted steps vanish and later references rebind to the surviving
// chain.
Problem corrupt_chain(const Problem& problem, Mode mode,
                      const std::vector<bool>& deleted,
                      const std::vector<bool>& arith, Rng& rng) {
  Problem patched = problem;
  patched.steps.clear();
  // old step index -> new index of the last surviving step at or before it
  std::vector<int> remap(problem.steps.size(), -1);
  int kept = -1;
  for (std::size_t i = 0; i < problem.steps.size(); ++i) {
    if (!deleted[i]) {
      SymbolicStep s = problem.steps[i];
      s.lhs_ref = kept;
      if (s.rhs_ref && *s.rhs_ref >= 0) {
        s.rhs_ref = remap[static_cast<std::size_t>(*s.rhs_ref)];
      }
      if (arith[i] && mode == Mode::Pot) {
        // Program-format slips change the written code: an operator flip or
        // a perturbed constant operand.
        if (!s.rhs_ref && rng.bernoulli(0.5)) {
          Rational delta(rng.range(1, 9));
          Rational bumped = s.rhs_const - delta;
          bool keep_positive = s.op == Op::Div || s.op == Op::Mul;
          if (bumped < Rational(keep_positive ? 1 : 0)) {
            bumped = s.rhs_const + delta;
          }
          s.rhs_const = bumped;
        } else {
          s.op = flip_op(s.op, rng);
        }
      }
      // Recompute this step over the patched chain.
      const Rational& lhs = patched_value(patched, s.lhs_ref);
      Rational rhs = s.rhs_ref ? patched_value(patched, *s.rhs_ref) : s.rhs_const;
      switch (s.op) {
        case Op::Add: s.result = lhs + rhs; break;
        case Op::Sub: s.result = lhs - rhs; break;
        case Op::Mul: s.result = lhs * rhs; break;
        case Op::Div:
          // Constant divisors are never zero; reference divisors do not occur.
          s.result = lhs / rhs;
          break;
      }
      if (arith[i] && mode == Mode::Cot) {
        // Prose-format slips state a wrong intermediate; the mistake then
        // propagates through the rest of the chain.
        Rational delta(rng.range(1, 9));
        s.result = rng.bernoulli(0.5) ? s.result + delta : s.result - delta;
      }
      patched.steps.push_back(std::move(s));
      ++kept;
    }
    remap[i] = kept;
  }
  patched.step_count = static_cast<int>(patched.steps.size());
  patched.answer = patched.steps.empty() ? patched.entities.front().second
                                         : patched.steps.back().result;
  return patched;
}

}  // namespace

std::vector<Candidate> sample_candidates(const Problem& problem,
                                         const TeacherConfig& teacher) {
  teacher.validate();
  std::vector<Candidate> out;
  for (Mode mode : {Mode::Cot, Mode::Pot}) {
    for (int j = 0; j < teacher.candidates_per_problem; ++j) {
      std::ostringstream ctx;
      ctx << problem.id << "/" << problem_gen::mode_name(mode) << "/" << j;
      Rng rng(mix_seed(teacher.seed, ctx.str()));

      const std::size_t n = problem.steps.size();
      std::vector<bool> deleted(n, false), arith(n, false);
      Candidate cand;
      cand.problem_id = problem.id;
      cand.mode = mode;
      for (std::size_t i = 0; i < n; ++i) {
        if (rng.bernoulli(teacher.step_deletion_prob)) {
          deleted[i] = true;
          cand.provenance.push_back(
              {CorruptionKind::StepDeletion, static_cast<int>(i)});
          continue;
        }
        if (rng.bernoulli(teacher.arithmetic_error_prob)) {
          arith[i] = true;
          cand.provenance.push_back(
              {CorruptionKind::ArithmeticError, static_cast<int>(i)});
        }
      }
      cand.jittered = rng.bernoulli(teacher.lexical_jitter_prob);
      int variant =
          cand.jittered
              ? 1 + static_cast<int>(rng.below(problem_gen::kRenderVariants - 1))
              : 0;

      if (cand.provenance.empty() && !cand.jittered) {
        // Untouched candidates are the stored gold rationale, byte for byte.
        cand.text = (mode == Mode::Cot ? problem.cot : problem.pot).text;
      } else if (cand.provenance.empty()) {
        cand.text = (mode == Mode::Cot ? problem_gen::render_cot(problem, variant)
                                       : problem_gen::render_pot(problem, variant))
                        .text;
      } else {
        Problem patched = corrupt_chain(problem, mode, deleted, arith, rng);
        cand.text = (mode == Mode::Cot ? problem_gen::render_cot(patched, variant)
                                       : problem_gen::render_pot(patched, variant))
                        .text;
      }
      out.push_back(std::move(cand));
    }
  }
  return out;
}

// ---- verification -------------------------------------------------------------

namespace {

// Last "#### <value>" line of a prose rationale, parsed exactly.
std::optional<Rational> final_sentinel_value(const std::string& text) {
  auto pos = text.rfind("####");
  if (pos == std::string::npos) return std::nullopt;
  return Rational::parse(text.substr(pos + 4));
}

}  // namespace

Verdict verify(const Candidate& candidate, const Problem& problem) {
  if (candidate.mode == Mode::Cot) {
    auto value = final_sentinel_value(candidate.text);
    if (!value) return Verdict::Invalid;
    return *value == problem.answer ? Verdict::Correct : Verdict::Wrong;
  }
  auto check = minilang::check_program(candidate.text, problem.answer);
  switch (check.outcome) {
    case minilang::CheckOutcome::Correct: return Verdict::Correct;
    case minilang::CheckOutcome::Wrong: return Verdict::Wrong;
    case minilang::CheckOutcome::Invalid: return Verdict::Invalid;
  }
  return Verdict::Invalid;
}

// ---- dedup ----------------------------------------------------------------------

namespace {

std::set<std::string> four_grams(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  std::set<std::string> grams;
  if (words.size() < 4) {
    std::string joined;
    for (const auto& word : words) joined += word + "\x1f";
    grams.insert(joined);
    return grams;
  }
  for (std::size_t i = 0; i + 4 <= words.size(); ++i) {
    grams.insert(words[i] + "\x1f" + words[i + 1] + "\x1f" + words[i + 2] +
                 "\x1f" + words[i + 3]);
  }
  return grams;
}

}  // namespace

double jaccard_4gram(const std::string& a, const std::string& b) {
  auto ga = four_grams(a);
  auto gb = four_grams(b);
  if (ga.empty() && gb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& g : ga) inter += gb.count(g);
  std::size_t uni = ga.size() + gb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Candidate> dedup(const std::vector<Candidate>& candidates,
                             double threshold) {
  // threshold 0 degenerates to one survivor per (problem, mode) group since
  // every similarity is >= 0.
  if (threshold < 0.0 || threshold > 1.0) {
    throw std::invalid_argument("dedup threshold must be in [0, 1]");
  }
  // Canonical order: problem id, then arrival index (stable sort).
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return candidates[a].problem_id < candidates[b].problem_id;
                   });
  std::vector<Candidate> kept;
  for (std::size_t idx : order) {
    const Candidate& c = candidates[idx];
    bool similar = false;
    for (const Candidate& k : kept) {
      if (k.problem_id != c.problem_id || k.mode != c.mode) continue;
      if (jaccard_4gram(k.text, c.text) >= threshold) {
        similar = true;
        break;
      }
    }
    if (!similar) kept.push_back(c);
  }
  return kept;
}

// ---- end-to-end -----------------------------------------------------------------

std::pair<std::vector<AcceptedPair>, FilterReport> build_corpus(
    const std::vector<problem_gen::Problem>& problems,
    const TeacherConfig& teacher, double dedup_threshold) {
  teacher.validate();
  struct PerProblem {
    std::vector<Candidate> correct;
    FilterCounts cot, pot;
  };
  std::vector<PerProblem> partial(problems.size());
  // Sampling and verification are independent per problem.
  kernels::parallel_for(static_cast<int>(problems.size()), [&](int i) {
    const Problem& p = problems[static_cast<std::size_t>(i)];
    PerProblem& slot = partial[static_cast<std::size_t>(i)];
    for (Candidate& c : sample_candidates(p, teacher)) {
      FilterCounts& counts =
          c.mode == Mode::Cot ? slot.cot : slot.pot;
      counts.generated += 1;
      switch (verify(c, p)) {
        case Verdict::Correct:
          counts.verified_correct += 1;
          slot.correct.push_back(std::move(c));
          break;
        case Verdict::Wrong: counts.rejected_wrong += 1; break;
        case Verdict::Invalid: counts.rejected_invalid += 1; break;
      }
    }
  });

  FilterReport report;
  std::vector<Candidate> correct;
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    index_of[problems[i].id] = i;
    const PerProblem& slot = partial[i];
    for (const Candidate& c : slot.correct) correct.push_back(c);
    auto accumulate = [](FilterCounts& into, const FilterCounts& from) {
      into.generated += from.generated;
      into.verified_correct += from.verified_correct;
      into.rejected_wrong += from.rejected_wrong;
      into.rejected_invalid += from.rejected_invalid;
    };
    accumulate(report.per_mode["cot"], slot.cot);
    accumulate(report.per_mode["pot"], slot.pot);
  }

  std::vector<Candidate> survivors = dedup(correct, dedup_threshold);
  std::vector<AcceptedPair> pairs;
  pairs.reserve(survivors.size());
  for (const Candidate& c : survivors) {
    FilterCounts& counts = report.per_mode[problem_gen::mode_name(c.mode)];
    counts.kept += 1;
    pairs.push_back({index_of.at(c.problem_id), Rationale{c.mode, c.text}});
  }
  for (auto& [mode, counts] : report.per_mode) {
    counts.removed_duplicates = counts.verified_correct - counts.kept;
    report.total.generated += counts.generated;
    report.total.verified_correct += counts.verified_correct;
    report.total.rejected_wrong += counts.rejected_wrong;
    report.total.rejected_invalid += counts.rejected_invalid;
    report.total.removed_duplicates += counts.removed_duplicates;
    report.total.kept += counts.kept;
  }
  return {std::move(pairs), std::move(report)};
}

// ---- persistence -----------------------------------------------------------------

void save_corpus(const std::vector<AcceptedPair>& pairs,
                 const std::vector<problem_gen::Problem>& problems,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const AcceptedPair& pair : pairs) {
    const Problem& p = problems[pair.problem_index];
    nlohmann::json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["answer"] = p.answer.to_string();
    j["step_count"] = p.step_count;
    j["mode"] = problem_gen::mode_name(pair.rationale.mode);
    j["text"] = pair.rationale.text;
    out << j.dump() << "\n";
  }
}

std::vector<AcceptedPair> load_corpus(
    const std::vector<problem_gen::Problem>& problems,
    const std::string& path) {
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    index_of[problems[i].id] = i;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<AcceptedPair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    auto it = index_of.find(j.at("id").get<std::string>());
    if (it == index_of.end()) {
      throw std::runtime_error(path + ": corpus references unknown problem " +
                               j.at("id").get<std::string>());
    }
    Mode mode = j.at("mode").get<std::string>() == "cot" ? Mode::Cot : Mode::Pot;
    out.push_back({it->second, Rationale{mode, j.at("text").get<std::string>()}});
  }
  return out;
}

void save_filter_report(const FilterReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# cotpot-filter-report v1\n";
  out << "mode,generated,verified_correct,rejected_wrong,rejected_invalid,"
         "removed_duplicates,kept\n";
  auto row = [&](const std::string& name, const FilterCounts& c) {
    out << name << "," << c.generated << "," << c.verified_correct << ","
        << c.rejected_wrong << "," << c.rejected_invalid << ","
        << c.removed_duplicates << "," << c.kept << "\n";
  };
  for (const auto& [mode, counts] : report.per_mode) row(mode, counts);
  row("total", report.total);
}

}  // namespace cotpot::synth
