#include "cotpot/problem_gen.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cotpot::problem_gen {

const char* mode_name(Mode m) { return m == Mode::Cot ? "cot" : "pot"; }

char op_char(Op op) {
  switch (op) {
    case Op::Add: return '+';
    case Op::Sub: return '-';
    case Op::Mul: return '*';
    case Op::Div: return '/';
  }
  return '?';
}

void ProblemSpec::validate() const {
  if (step_count < 1 || step_count > 8) {
    throw InvalidSpec("step_count must be in 1..8, got " +
                      std::to_string(step_count));
  }
  if (allowed_ops.empty()) throw InvalidSpec("allowed_ops must be nonempty");
  if (template_family < 0 || template_family >= template_family_count()) {
    throw InvalidSpec("unknown template family " +
                      std::to_string(template_family));
  }
}

// ---- surface templates -----------------------------------------------------

namespace {

struct Family {
  const char* actor;
  const char* item;
  std::array<const char*, kRenderVariants> add_verbs;
  std::array<const char*, kRenderVariants> sub_verbs;
};

const std::array<Family, 5> kFamilies = {{
    {"Maya", "apples", {"finds", "picks", "gathers"}, {"eats", "drops", "discards"}},
    {"Leo", "marbles", {"wins", "collects", "buys"}, {"loses", "trades", "misplaces"}},
    {"Ana", "stickers", {"receives", "earns", "swaps"}, {"gives", "sheds", "donates"}},
    {"Tom", "coins", {"digs", "grabs", "saves"}, {"spends", "pays", "tosses"}},
    {"Rosa", "shells", {"spots", "scoops", "adds"}, {"returns", "breaks", "buries"}},
}};

const std::array<const char*, 8> kOrdinals = {
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth"};

const std::array<const char*, kRenderVariants> kOpeners = {
    "starts with", "begins with", "sets out with"};
const std::array<const char*, kRenderVariants> kMulPhrases = {
    "the number of", "the count of", "the pile of"};
const std::array<const char*, kRenderVariants> kClosers = {
    "have now ?", "have at the end ?", "have after all that ?"};

std::string ref_phrase(int ref) {
  if (ref < 0) return "at the start";
  return std::string("after the ") + kOrdinals[static_cast<std::size_t>(ref)] +
         " change";
}

// values[k] is the result of step k; values[-1] is exposed via `initial`.
const Rational& value_of(const Problem& p, int ref) {
  if (ref < 0) return p.entities.front().second;
  return p.steps[static_cast<std::size_t>(ref)].result;
}

std::string render_question(const Problem& p, int family_idx, int variant) {
  const Family& fam = kFamilies[static_cast<std::size_t>(family_idx)];
  std::ostringstream os;
  os << fam.actor << " " << kOpeners[static_cast<std::size_t>(variant)] << " "
     << p.entities.front().second.to_string() << " " << fam.item << ".";
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    const SymbolicStep& s = p.steps[i];
    os << " Then ";
    std::string operand =
        s.rhs_ref ? "as many " + std::string(fam.item) + " as there were " +
                        ref_phrase(*s.rhs_ref)
                  : s.rhs_const.to_string();
    switch (s.op) {
      case Op::Add:
        os << fam.actor << " " << fam.add_verbs[static_cast<std::size_t>(variant)]
           << " " << operand << (s.rhs_ref ? "" : " more " + std::string(fam.item))
           << ".";
        break;
      case Op::Sub:
        os << fam.actor << " " << fam.sub_verbs[static_cast<std::size_t>(variant)]
           << " " << operand << (s.rhs_ref ? "" : " " + std::string(fam.item))
           << ".";
        break;
      case Op::Mul:
        os << kMulPhrases[static_cast<std::size_t>(variant)] << " " << fam.item
           << " becomes " << s.rhs_const.to_string() << " times as many.";
        break;
      case Op::Div:
        os << "the " << fam.item << " are split into "
           << s.rhs_const.to_string() << " equal shares and " << fam.actor
           << " keeps one share.";
        break;
    }
  }
  os << " How many " << fam.item << " does " << fam.actor << " "
     << kClosers[static_cast<std::size_t>(variant)];
  return os.str();
}

}  // namespace

int template_family_count() { return static_cast<int>(kFamilies.size()); }

Rationale render_cot(const Problem& problem, int variant) {
  static const std::array<const char*, kRenderVariants> kLineLead = {
      "Step", "At step", "In step"};
  std::ostringstream os;
  for (std::size_t i = 0; i < problem.steps.size(); ++i) {
    const SymbolicStep& s = problem.steps[i];
    const Rational& lhs = value_of(problem, s.lhs_ref);
    Rational rhs = s.rhs_ref ? value_of(problem, *s.rhs_ref) : s.rhs_const;
    os << kLineLead[static_cast<std::size_t>(variant)] << " " << (i + 1) << " : "
       << lhs.to_string() << " " << op_char(s.op) << " " << rhs.to_string()
       << " = " << s.result.to_string() << ".\n";
  }
  os << "#### " << problem.answer.to_string();
  return {Mode::Cot, os.str()};
}

Rationale render_pot(const Problem& problem, int variant) {
  std::ostringstream os;
  for (std::size_t i = 0; i < problem.steps.size(); ++i) {
    const SymbolicStep& s = problem.steps[i];
    std::string n = s.rhs_ref ? (*s.rhs_ref < 0 ? std::string("the start count")
                                                : "the step " +
                                                      std::to_string(*s.rhs_ref + 1) +
                                                      " count")
                              : s.rhs_const.to_string();
    switch (s.op) {
      case Op::Add:
        os << (variant == 0 ? "# add " + n
                            : variant == 1 ? "# " + n + " more" : "# gains " + n);
        break;
      case Op::Sub:
        os << (variant == 0 ? "# subtract " + n
                            : variant == 1 ? "# " + n + " removed" : "# loses " + n);
        break;
      case Op::Mul:
        os << (variant == 0 ? "# times " + n
                            : variant == 1 ? "# " + n + " groups" : "# grows " + n + " fold");
        break;
      case Op::Div:
        os << (variant == 0 ? "# split into " + n
                            : variant == 1 ? "# one of " + n + " shares"
                                           : "# divided by " + n);
        break;
    }
    os << "\n";
    std::string lhs = s.lhs_ref < 0
                          ? value_of(problem, -1).to_string()
                          : "s" + std::to_string(s.lhs_ref + 1);
    std::string rhs;
    if (s.rhs_ref) {
      rhs = *s.rhs_ref < 0 ? value_of(problem, -1).to_string()
                           : "s" + std::to_string(*s.rhs_ref + 1);
    } else {
      rhs = s.rhs_const.to_string();
    }
    os << "let s" << (i + 1) << " = " << lhs << " " << op_char(s.op) << " "
       << rhs << ";\n";
  }
  os << "answer s" << problem.steps.size() << ";";
  return {Mode::Pot, os.str()};
}

std::vector<std::string> grammar_lexicon() {
  std::set<std::string> words;
  auto add_text = [&](const std::string& text) {
    std::string word;
    for (char c : text) {
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
          (!word.empty() && c >= '0' && c <= '9')) {
        word.push_back(c);
      } else {
        if (!word.empty()) words.insert(word);
        word.clear();
      }
    }
    if (!word.empty()) words.insert(word);
  };
  for (const Family& f : kFamilies) {
    add_text(f.actor);
    add_text(f.item);
    for (const char* v : f.add_verbs) add_text(v);
    for (const char* v : f.sub_verbs) add_text(v);
  }
  for (const char* w : kOrdinals) add_text(w);
  for (const char* w : kOpeners) add_text(w);
  for (const char* w : kMulPhrases) add_text(w);
  for (const char* w : kClosers) add_text(w);
  for (const char* w :
       {"Then", "How", "many", "does", "more", "as", "there", "were", "at",
        "the", "start", "after", "change", "becomes", "times", "are", "split",
        "into", "equal", "shares", "and", "keeps", "one", "share", "Step",
        "At", "In", "step", "add", "subtract", "removed", "loses", "gains",
        "groups", "grows", "fold", "divided", "by", "of", "count", "let",
        "answer", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"}) {
    words.insert(w);
  }
  return {words.begin(), words.end()};
}

// ---- generation -------------------------------------------------------------

namespace {

struct MagnitudeLimits {
  std::int64_t q0_max;
  std::int64_t const_max;
  std::int64_t mul_max;
  std::int64_t div_cap;        // largest exact divisor considered
  std::int64_t div_free_max;   // divisor cap when rational answers are allowed
  std::size_t digit_cap;       // retry when an intermediate outgrows this
};

MagnitudeLimits limits_for(Magnitude m) {
  if (m == Magnitude::Small) return {20, 20, 9, 20, 9, 6};
  return {1000000, 1000000, 9, 1000, 99, 8};
}

mpz_class floor_of(const Rational& r) {
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), r.numerator().get_mpz_t(),
             r.denominator().get_mpz_t());
  return q;
}

std::vector<std::int64_t> exact_divisors(const Rational& value,
                                         std::int64_t cap) {
  std::vector<std::int64_t> out;
  if (!value.is_integer()) return out;
  mpz_class n = abs(value.numerator());
  if (n == 0) {
    for (std::int64_t d = 2; d <= std::min<std::int64_t>(cap, 9); ++d)
      out.push_back(d);
    return out;
  }
  for (std::int64_t d = 2; d <= cap; ++d) {
    if (mpz_divisible_ui_p(n.get_mpz_t(), static_cast<unsigned long>(d)))
      out.push_back(d);
    if (out.size() >= 32) break;
  }
  return out;
}

}  // namespace

Problem generate_problem(const ProblemSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, "problem"));
  const MagnitudeLimits lim = limits_for(spec.magnitude);
  const Family& fam = kFamilies[static_cast<std::size_t>(spec.template_family)];

  Problem p;
  Rational q0(rng.range(2, lim.q0_max));
  p.entities.emplace_back(std::string(fam.actor) + " " + fam.item, q0);

  Rational current = q0;
  for (int i = 0; i < spec.step_count; ++i) {
    std::optional<SymbolicStep> chosen;
    for (int attempt = 0; attempt < 8 && !chosen; ++attempt) {
      Op op = rng.pick(spec.allowed_ops);
      SymbolicStep s;
      s.op = op;
      s.lhs_ref = i - 1;
      switch (op) {
        case Op::Add: {
          if (i >= 1 && rng.bernoulli(0.15)) {
            int ref = static_cast<int>(rng.range(-1, i - 1));
            s.rhs_ref = ref;
            s.result = current + value_of(p, ref);
          } else {
            s.rhs_const = Rational(rng.range(1, lim.const_max));
            s.result = current + s.rhs_const;
          }
          break;
        }
        case Op::Sub: {
          if (i >= 1 && rng.bernoulli(0.15)) {
            std::vector<int> candidates;
            for (int ref = -1; ref < i; ++ref) {
              if (value_of(p, ref) <= current) candidates.push_back(ref);
            }
            if (!candidates.empty()) {
              int ref = rng.pick(candidates);
              s.rhs_ref = ref;
              s.result = current - value_of(p, ref);
              break;
            }
          }
          mpz_class room = floor_of(current);
          if (room < 1) continue;  // nothing to take away; re-roll the op
          std::int64_t hi = std::min<std::int64_t>(
              lim.const_max,
              room.fits_slong_p() ? room.get_si() : lim.const_max);
          s.rhs_const = Rational(rng.range(1, hi));
          s.result = current - s.rhs_const;
          break;
        }
        case Op::Mul: {
          s.rhs_const = Rational(rng.range(2, lim.mul_max));
          s.result = current * s.rhs_const;
          break;
        }
        case Op::Div: {
          if (spec.rational_division) {
            s.rhs_const = Rational(rng.range(2, lim.div_free_max));
          } else {
            auto divisors = exact_divisors(current, lim.div_cap);
            if (divisors.empty()) continue;
            s.rhs_const = Rational(rng.pick(divisors));
          }
          s.result = current / s.rhs_const;
          break;
        }
      }
      if (s.result.max_digits() > lim.digit_cap) continue;
      if (s.result < Rational(0)) continue;
      chosen = std::move(s);
    }
    if (!chosen) {
      // Every sampled op failed its guards; take the first realizable one.
      SymbolicStep s;
      s.lhs_ref = i - 1;
      bool done = false;
      for (Op op : spec.allowed_ops) {
        s.op = op;
        if (op == Op::Add) {
          s.rhs_const = Rational(rng.range(1, 9));
          s.result = current + s.rhs_const;
          done = true;
        } else if (op == Op::Sub && floor_of(current) >= 1) {
          s.rhs_const = Rational(1);
          s.result = current - s.rhs_const;
          done = true;
        } else if (op == Op::Mul && current.max_digits() < lim.digit_cap) {
          s.rhs_const = Rational(2);
          s.result = current * s.rhs_const;
          done = true;
        } else if (op == Op::Div) {
          s.rhs_const =
              Rational(spec.rational_division ? rng.range(2, 9) : 1);
          s.result = current / s.rhs_const;
          done = true;
        }
        if (done) break;
      }
      if (!done) throw InvalidSpec("cannot realize a step under allowed_ops");
      chosen = std::move(s);
    }
    current = chosen->result;
    p.steps.push_back(std::move(*chosen));
  }

  p.answer = current;
  p.step_count = static_cast<int>(p.steps.size());
  int question_variant = static_cast<int>(rng.below(kRenderVariants));
  p.question = render_question(p, spec.template_family, question_variant);
  p.cot = render_cot(p);
  p.pot = render_pot(p);

  std::ostringstream key;
  key << p.question << "|" << p.answer.to_string();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "p%016llx",
                static_cast<unsigned long long>(fnv1a(key.str())));
  p.id = buf;
  return p;
}

// ---- dataset assembly --------------------------------------------------------

std::string GenConfig::fingerprint() const {
  std::ostringstream os;
  os << "train=" << train_size << ";held_out=" << held_out_size << ";steps=";
  for (std::size_t i = 0; i < step_counts.size(); ++i) {
    os << (i ? "," : "") << step_counts[i];
  }
  os << ";large_fraction=" << large_fraction << ";ops=";
  for (Op op : allowed_ops) os << op_char(op);
  os << ";rational_division=" << (rational_division ? 1 : 0)
     << ";master_seed=" << master_seed;
  return os.str();
}

Dataset generate_dataset(const GenConfig& config) {
  if (config.train_size < 0 || config.held_out_size < 0) {
    throw InvalidSpec("split sizes must be >= 0");
  }
  if (config.step_counts.empty()) throw InvalidSpec("step_counts empty");

  std::ostringstream hash_src;
  hash_src << config.fingerprint();
  char hash_buf[20];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(hash_src.str())));
  std::string config_hash = hash_buf;

  Dataset ds;
  ds.train_manifest.name = "train";
  ds.train_manifest.split = "train";
  ds.train_manifest.config_hash = config_hash;
  ds.held_out_manifest.name = "held_out";
  ds.held_out_manifest.split = "held_out";
  ds.held_out_manifest.config_hash = config_hash;

  std::set<std::string> seen_questions;
  std::set<std::string> seen_ids;
  Rng rng(mix_seed(config.master_seed, "dataset"));

  auto fill = [&](const char* split, int size, std::vector<Problem>& out,
                  DatasetManifest& manifest) {
    for (int i = 0; i < size; ++i) {
      for (int retry = 0;; ++retry) {
        if (retry > 200) throw InvalidSpec("could not generate a fresh problem");
        ProblemSpec spec;
        spec.step_count = static_cast<int>(
            config.step_counts[rng.below(config.step_counts.size())]);
        spec.magnitude = rng.bernoulli(config.large_fraction)
                             ? Magnitude::Large
                             : Magnitude::Small;
        spec.allowed_ops = config.allowed_ops;
        spec.rational_division = config.rational_division;
        spec.template_family =
            static_cast<int>(rng.below(static_cast<std::uint64_t>(template_family_count())));
        std::ostringstream ctx;
        ctx << "gen/" << split << "/" << i << "/" << retry;
        spec.seed = mix_seed(config.master_seed, ctx.str());
        Problem p = generate_problem(spec);
        if (!seen_questions.insert(p.question).second) continue;
        if (!seen_ids.insert(p.id).second) continue;
        manifest.problem_ids.push_back(p.id);
        manifest.counts["cot"][p.step_count] += 1;
        manifest.counts["pot"][p.step_count] += 1;
        out.push_back(std::move(p));
        break;
      }
    }
  };
  fill("train", config.train_size, ds.train, ds.train_manifest);
  fill("held_out", config.held_out_size, ds.held_out, ds.held_out_manifest);
  return ds;
}

// ---- persistence ---------------------------------------------------------------

namespace {

Rational parse_rational_field(const nlohmann::json& j, const char* key,
                              const std::string& id) {
  auto value = Rational::parse(j.at(key).get<std::string>());
  if (!value) {
    throw std::runtime_error("bad rational field '" + std::string(key) +
                             "' in record " + id);
  }
  return *value;
}

Op op_from_char(char c) {
  switch (c) {
    case '+': return Op::Add;
    case '-': return Op::Sub;
    case '*': return Op::Mul;
    case '/': return Op::Div;
  }
  throw std::runtime_error(std::string("unknown op '") + c + "'");
}

}  // namespace

void save_problems(const std::vector<Problem>& problems,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Problem& p : problems) {
    nlohmann::json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["answer"] = p.answer.to_string();
    j["step_count"] = p.step_count;
    j["cot"] = p.cot.text;
    j["pot"] = p.pot.text;
    // The symbolic chain rides along so the noisy teacher can re-render and
    // corrupt loaded problems.
    nlohmann::json entities = nlohmann::json::array();
    for (const auto& [name, quantity] : p.entities) {
      entities.push_back({{"name", name}, {"quantity", quantity.to_string()}});
    }
    j["entities"] = entities;
    nlohmann::json steps = nlohmann::json::array();
    for (const SymbolicStep& s : p.steps) {
      nlohmann::json step;
      step["op"] = std::string(1, op_char(s.op));
      step["lhs_ref"] = s.lhs_ref;
      if (s.rhs_ref) {
        step["rhs_ref"] = *s.rhs_ref;
      } else {
        step["rhs_const"] = s.rhs_const.to_string();
      }
      step["result"] = s.result.to_string();
      steps.push_back(step);
    }
    j["steps"] = steps;
    out << j.dump() << "\n";
  }
}

std::vector<Problem> load_problems(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Problem> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Problem p;
    p.id = j.at("id").get<std::string>();
    p.question = j.at("question").get<std::string>();
    p.answer = parse_rational_field(j, "answer", p.id);
    p.step_count = j.at("step_count").get<int>();
    p.cot = {Mode::Cot, j.at("cot").get<std::string>()};
    p.pot = {Mode::Pot, j.at("pot").get<std::string>()};
    for (const auto& e : j.at("entities")) {
      p.entities.emplace_back(e.at("name").get<std::string>(),
                              parse_rational_field(e, "quantity", p.id));
    }
    for (const auto& js : j.at("steps")) {
      SymbolicStep s;
      s.op = op_from_char(js.at("op").get<std::string>().at(0));
      s.lhs_ref = js.at("lhs_ref").get<int>();
      if (js.contains("rhs_ref")) {
        s.rhs_ref = js.at("rhs_ref").get<int>();
      } else {
        s.rhs_const = parse_rational_field(js, "rhs_const", p.id);
      }
      s.result = parse_rational_field(js, "result", p.id);
      p.steps.push_back(std::move(s));
    }
    if (static_cast<int>(p.steps.size()) != p.step_count) {
      throw std::runtime_error("record " + p.id +
                               ": step_count disagrees with the chain");
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "cotpot-manifest v1\n";
  out << "name=" << manifest.name << "\n";
  out << "split=" << manifest.split << "\n";
  out << "config_hash=" << manifest.config_hash << "\n";
  for (const auto& [mode, per_step] : manifest.counts) {
    out << "counts_" << mode << "=";
    bool first = true;
    for (const auto& [step, n] : per_step) {
      out << (first ? "" : ",") << step << ":" << n;
      first = false;
    }
    out << "\n";
  }
  out << "problems=" << manifest.problem_ids.size() << "\n";
  out << "---\n";
  for (const auto& id : manifest.problem_ids) out << id << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "cotpot-manifest v1") {
    throw std::runtime_error(path + ": not a cotpot manifest");
  }
  DatasetManifest m;
  bool in_ids = false;
  while (std::getline(in, line)) {
    if (line == "---") {
      in_ids = true;
      continue;
    }
    if (in_ids) {
      if (!line.empty()) m.problem_ids.push_back(line);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "name") m.name = value;
    else if (key == "split") m.split = value;
    else if (key == "config_hash") m.config_hash = value;
    else if (key.rfind("counts_", 0) == 0) {
      std::string mode = key.substr(7);
      std::istringstream vs(value);
      std::string pair;
      while (std::getline(vs, pair, ',')) {
        auto colon = pair.find(':');
        if (colon == std::string::npos) continue;
        m.counts[mode][std::stoi(pair.substr(0, colon))] =
            std::stoi(pair.substr(colon + 1));
      }
    }
  }
  return m;
}

}  // namespace cotpot::problem_gen
