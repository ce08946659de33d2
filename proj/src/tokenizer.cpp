#include "cotpot/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace cotpot::tok {

namespace {

const char* kSpecialNames[kNumSpecials] = {"<pad>", "<bos>", "<eos>", "<q>",
                                           "<cot>", "<pot>", "####"};

bool is_word_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_word_char(char c) {
  return is_word_start(c) || (c >= '0' && c <= '9');
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::vector<std::string> split_symbols(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '\n') {
      out.emplace_back("\n");
      ++i;
      continue;
    }
    if (text.compare(i, 4, "####") == 0) {
      out.emplace_back("####");
      i += 4;
      continue;
    }
    if (is_word_start(c)) {
      std::size_t start = i;
      while (i < text.size() && is_word_char(text[i])) ++i;
      out.push_back(text.substr(start, i - start));
      continue;
    }
    if (is_digit(c)) {
      out.emplace_back(1, c);
      ++i;
      continue;
    }
    out.emplace_back(1, c);  // punctuation and operators, one symbol each
    ++i;
  }
  return out;
}

Vocab Vocab::build(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("vocabulary corpus is empty");
  std::map<std::string, long> freq;
  for (const auto& text : corpus) {
    for (auto& sym : split_symbols(text)) {
      if (sym == "####") continue;  // reserved: encodes as the Ans special
      freq[sym] += 1;
    }
  }
  std::vector<std::pair<std::string, long>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (int s = 0; s < kNumSpecials; ++s) {
    v.id_to_symbol_.emplace_back(kSpecialNames[s]);
  }
  for (auto& [sym, n] : entries) v.id_to_symbol_.push_back(sym);
  for (int id = 0; id < static_cast<int>(v.id_to_symbol_.size()); ++id) {
    v.symbol_to_id_[v.id_to_symbol_[static_cast<std::size_t>(id)]] = id;
  }
  return v;
}

int Vocab::id_of(const std::string& symbol) const {
  auto it = symbol_to_id_.find(symbol);
  if (it == symbol_to_id_.end()) {
    throw OutOfVocabulary("symbol not in vocabulary: '" + symbol + "'");
  }
  return it->second;
}

const std::string& Vocab::symbol_of(int id) const {
  if (id < 0 || id >= size()) {
    throw UnknownId("token id out of range: " + std::to_string(id));
  }
  return id_to_symbol_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  // One symbol per line, id = line order. The newline symbol is escaped.
  for (const auto& sym : id_to_symbol_) {
    out << (sym == "\n" ? "\\n" : sym) << "\n";
  }
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    v.id_to_symbol_.push_back(line == "\\n" ? "\n" : line);
  }
  for (int id = 0; id < static_cast<int>(v.id_to_symbol_.size()); ++id) {
    v.symbol_to_id_[v.id_to_symbol_[static_cast<std::size_t>(id)]] = id;
  }
  if (v.size() < kNumSpecials) {
    throw std::runtime_error(path + ": truncated vocabulary file");
  }
  return v;
}

std::vector<int> encode_text(const Vocab& vocab, const std::string& text) {
  std::vector<int> ids;
  for (const auto& sym : split_symbols(text)) {
    ids.push_back(sym == "####" ? kAns : vocab.id_of(sym));
  }
  return ids;
}

std::vector<int> encode_prompt(const Vocab& vocab,
                               const problem_gen::Problem& problem,
                               problem_gen::Mode mode) {
  std::vector<int> ids = {kBos, kQuestion};
  auto q = encode_text(vocab, problem.question);
  ids.insert(ids.end(), q.begin(), q.end());
  ids.push_back(mode == problem_gen::Mode::Cot ? kCotTag : kPotTag);
  return ids;
}

EncodedExample encode(const Vocab& vocab, const problem_gen::Problem& problem,
                      const problem_gen::Rationale& rationale) {
  EncodedExample ex;
  ex.mode = rationale.mode;
  ex.problem_id = problem.id;
  ex.ids = encode_prompt(vocab, problem, rationale.mode);
  ex.loss_mask.assign(ex.ids.size(), 0);
  auto r = encode_text(vocab, rationale.text);
  for (int id : r) {
    ex.ids.push_back(id);
    ex.loss_mask.push_back(1);
  }
  ex.ids.push_back(kEos);
  ex.loss_mask.push_back(1);
  return ex;
}

std::string decode(const Vocab& vocab, const std::vector<int>& ids) {
  std::string out;
  bool prev_digit = false;
  for (int id : ids) {
    const std::string& sym = vocab.symbol_of(id);
    if (sym == "\n") {
      out.push_back('\n');
      prev_digit = false;
      continue;
    }
    bool digit = sym.size() == 1 && is_digit(sym[0]);
    if (!out.empty() && out.back() != '\n' && !(digit && prev_digit)) {
      out.push_back(' ');
    }
    out += sym;
    prev_digit = digit;
  }
  return out;
}

}  // namespace cotpot::tok
