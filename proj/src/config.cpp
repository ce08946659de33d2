#include "cotpot/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace cotpot::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string ops_to_string(const std::vector<problem_gen::Op>& ops) {
  std::string s;
  for (auto op : ops) s.push_back(problem_gen::op_char(op));
  return s;
}

std::vector<problem_gen::Op> ops_from_string(const std::string& s) {
  std::vector<problem_gen::Op> ops;
  for (char c : s) {
    switch (c) {
      case '+': ops.push_back(problem_gen::Op::Add); break;
      case '-': ops.push_back(problem_gen::Op::Sub); break;
      case '*': ops.push_back(problem_gen::Op::Mul); break;
      case '/': ops.push_back(problem_gen::Op::Div); break;
      case ' ': break;
      default:
        throw ConfigError(std::string("unknown op character '") + c + "'");
    }
  }
  if (ops.empty()) throw ConfigError("ops must be nonempty");
  return ops;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

long parse_long(const std::string& v) {
  std::size_t pos = 0;
  long x = std::stol(v, &pos);
  if (pos != v.size()) throw ConfigError("bad integer '" + v + "'");
  return x;
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double x = std::stod(v, &pos);
  if (pos != v.size()) throw ConfigError("bad number '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = std::stoull(v, &pos);
  if (pos != v.size()) throw ConfigError("bad seed '" + v + "'");
  return x;
}

const std::vector<Field>& field_table() {
  static const std::vector<Field> fields = {
      {"problems", "train_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.problems.train_size = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.problems.train_size);
       }},
      {"problems", "held_out_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.problems.held_out_size = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.problems.held_out_size);
       }},
      {"problems", "step_counts",
       [](ExperimentConfig& c, const std::string& v) {
         c.problems.step_counts.clear();
         for (const auto& item : split_csv(v)) {
           c.problems.step_counts.push_back(static_cast<int>(parse_long(item)));
         }
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.problems.step_counts.size(); ++i) {
           s += (i ? "," : "") + std::to_string(c.problems.step_counts[i]);
         }
         return s;
       }},
      {"problems", "large_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.problems.large_fraction = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.problems.large_fraction);
       }},
      {"problems", "ops",
       [](ExperimentConfig& c, const std::string& v) {
         c.problems.allowed_ops = ops_from_string(v);
       },
       [](const ExperimentConfig& c) {
         return ops_to_string(c.problems.allowed_ops);
       }},
      {"problems", "rational_division",
       [](ExperimentConfig& c, const std::string& v) {
         c.problems.rational_division = parse_long(v) != 0;
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.problems.rational_division ? 1 : 0);
       }},
      {"teacher", "k",
       [](ExperimentConfig& c, const std::string& v) {
         c.teacher.candidates_per_problem = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.teacher.candidates_per_problem);
       }},
      {"teacher", "arithmetic_error_prob",
       [](ExperimentConfig& c, const std::string& v) {
         c.teacher.arithmetic_error_prob = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.teacher.arithmetic_error_prob);
       }},
      {"teacher", "step_deletion_prob",
       [](ExperimentConfig& c, const std::string& v) {
         c.teacher.step_deletion_prob = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.teacher.step_deletion_prob);
       }},
      {"teacher", "lexical_jitter_prob",
       [](ExperimentConfig& c, const std::string& v) {
         c.teacher.lexical_jitter_prob = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.teacher.lexical_jitter_prob);
       }},
      {"teacher", "temperature",
       [](ExperimentConfig& c, const std::string& v) {
         c.teacher_temperature = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.teacher_temperature);
       }},
      {"synth", "dedup_threshold",
       [](ExperimentConfig& c, const std::string& v) {
         c.dedup_threshold = parse_double(v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.dedup_threshold); }},
      {"model", "d_model",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.d_model = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.model.d_model); }},
      {"model", "n_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.n_layers = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.model.n_layers); }},
      {"model", "n_heads",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.n_heads = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.model.n_heads); }},
      {"model", "d_ff",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.d_ff = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.model.d_ff); }},
      {"model", "max_seq_len",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.max_seq_len = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.model.max_seq_len);
       }},
      {"model", "dropout_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.dropout_rate = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.model.dropout_rate);
       }},
      {"train", "peak_lr",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.peak_lr = parse_double(v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.peak_lr); }},
      {"train", "warmup_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.warmup_fraction = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.train.warmup_fraction);
       }},
      {"train", "epochs_per_phase",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.epochs_per_phase = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.train.epochs_per_phase);
       }},
      {"train", "batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.batch_size = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.train.batch_size);
       }},
      {"train", "clip_norm",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.clip_norm = parse_double(v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.clip_norm); }},
      {"train", "beta1",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.beta1 = parse_double(v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.beta1); }},
      {"train", "beta2",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.beta2 = parse_double(v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.beta2); }},
      {"train", "epsilon",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.epsilon = parse_double(v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.epsilon); }},
      {"curriculum", "retention_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.retention_fraction = parse_double(v);
       },
       [](const ExperimentConfig& c) {
         return fmt_double(c.retention_fraction);
       }},
      {"eval", "decode_budget_multiplier",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_opts.decode_budget_multiplier = static_cast<int>(parse_long(v));
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.eval_opts.decode_budget_multiplier);
       }},
      {"ablate", "strategies",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategies = split_csv(v);
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.strategies.size(); ++i) {
           s += (i ? "," : "") + c.strategies[i];
         }
         return s;
       }},
      {"ablate", "seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& item : split_csv(v)) c.seeds.push_back(parse_u64(item));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) {
           s += (i ? "," : "") + std::to_string(c.seeds[i]);
         }
         return s;
       }},
      {"run", "master_seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.master_seed = parse_u64(v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.master_seed); }},
      {"run", "out_dir",
       [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return c.out_dir; }},
  };
  return fields;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : field_table()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() { return ExperimentConfig{}; }

void ExperimentConfig::apply_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  std::string section;
  int lineno = 0;
  bool saw_schema = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (lineno == 1 && t.rfind("cotpot-config", 0) == 0) {
      saw_schema = true;
      continue;
    }
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key=value, got '" + t + "'", lineno);
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    const Field* field = find_field(section, key);
    if (!field) {
      throw ConfigError("unknown option [" + section + "] " + key, lineno);
    }
    try {
      field->set(*this, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("[") + section + "] " + key + ": " +
                            e.what(),
                        lineno);
    }
  }
  (void)saw_schema;  // schema line optional on input, always written on output
}

void ExperimentConfig::apply_env() {
  for (const Field& f : field_table()) {
    std::string name = f.section + "__" + f.key;
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    if (const char* value = std::getenv(name.c_str())) {
      f.set(*this, value);
    }
  }
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override must be section.key=value, got '" +
                      assignment + "'");
  }
  std::string section = assignment.substr(0, dot);
  std::string key = assignment.substr(dot + 1, eq - dot - 1);
  std::string value = assignment.substr(eq + 1);
  const Field* field = find_field(section, key);
  if (!field) throw ConfigError("unknown option " + section + "." + key);
  field->set(*this, value);
}

void ExperimentConfig::resolve() {
  if (teacher_temperature >= 0.0) {
    teacher = synth::TeacherConfig::from_temperature(
        teacher_temperature, teacher.candidates_per_problem, teacher.seed);
  }
  problems.master_seed = master_seed;
  teacher.seed = mix_seed(master_seed, "teacher");
  teacher.validate();
  if (dedup_threshold < 0.0 || dedup_threshold > 1.0) {
    throw ConfigError("synth.dedup_threshold must be in [0, 1]");
  }
  if (retention_fraction < 0.0 || retention_fraction > 1.0) {
    throw ConfigError("curriculum.retention_fraction must be in [0, 1]");
  }
  if (seeds.empty()) throw ConfigError("ablate.seeds must be nonempty");
  for (const std::string& name : strategies) {
    if (!curriculum::StrategySpec::parse(name)) {
      throw ConfigError("unknown strategy '" + name + "'");
    }
  }
  try {
    train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  // vocab_size is derived later; validate the rest through a stand-in.
  model::ModelConfig probe = model;
  probe.vocab_size = 2;
  try {
    probe.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

std::string ExperimentConfig::snapshot() const {
  std::ostringstream os;
  os << "cotpot-config v1\n";
  std::string current;
  for (const Field& f : field_table()) {
    if (f.section != current) {
      os << "[" << f.section << "]\n";
      current = f.section;
    }
    os << f.key << "=" << f.get(*this) << "\n";
  }
  return os.str();
}

}  // namespace cotpot::config
