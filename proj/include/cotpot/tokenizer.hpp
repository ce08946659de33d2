#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cotpot/problem_gen.hpp"

// Word-and-symbol tokenization with explicit region markers. The loss mask
// realizes conditioning on the question: only rationale tokens (and the
// closing EOS) are supervised.
namespace cotpot::tok {

struct EmptyCorpus : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutOfVocabulary : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownId : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Special ids occupy the lowest slots and are never produced by text
// tokenization; the "####" answer sentinel is mapped to Ans by the encoder.
enum SpecialId : int {
  kPad = 0,
  kBos = 1,
  kEos = 2,
  kQuestion = 3,
  kCotTag = 4,
  kPotTag = 5,
  kAns = 6,
  kNumSpecials = 7,
};

// Splits text into surface symbols: identifier-like words stay whole, digits
// become one symbol per character, newlines and punctuation are single
// symbols, "####" is one symbol.
std::vector<std::string> split_symbols(const std::string& text);

class Vocab {
 public:
  // Word-level vocabulary with deterministic id order: specials first, then
  // corpus symbols by (frequency desc, lexicographic asc).
  static Vocab build(const std::vector<std::string>& corpus);

  int size() const { return static_cast<int>(id_to_symbol_.size()); }
  int id_of(const std::string& symbol) const;  // throws OutOfVocabulary
  const std::string& symbol_of(int id) const;  // throws UnknownId

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> id_to_symbol_;
  std::unordered_map<std::string, int> symbol_to_id_;
};

struct EncodedExample {
  std::vector<int> ids;
  std::vector<std::uint8_t> loss_mask;  // same length as ids
  problem_gen::Mode mode;
  std::string problem_id;
};

// Layout: BOS, Q, question symbols, mode tag, rationale symbols, EOS.
// loss_mask is false through the mode tag and true from the first rationale
// token through EOS.
EncodedExample encode(const Vocab& vocab, const problem_gen::Problem& problem,
                      const problem_gen::Rationale& rationale);

// Encode just the conditioning prefix (BOS..mode tag), for decoding.
std::vector<int> encode_prompt(const Vocab& vocab,
                               const problem_gen::Problem& problem,
                               problem_gen::Mode mode);

// Encode free text into symbol ids (no markers). Used by tests.
std::vector<int> encode_text(const Vocab& vocab, const std::string& text);

// Detokenize: digit runs rejoin, newline symbols emit line breaks, special
// ids render as readable markers ("####" for the answer sentinel).
std::string decode(const Vocab& vocab, const std::vector<int>& ids);

}  // namespace cotpot::tok
