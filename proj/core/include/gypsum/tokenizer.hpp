#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gypsum/vocab.hpp"

namespace gypsum {

// Splits raw text into sub-word strings. One tokenizer instance is shared by
// the token encoder and the AST leaf splitter so both sides agree on units.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> split(const std::string& text) const = 0;
};

// Deterministic rule-based splitter, no training required:
//   - whitespace separates tokens and is dropped
//   - each punctuation character is its own token
//   - identifiers split at underscores, keeping each "_" as a token
//     ("num_a" -> "num", "_", "a")
//   - camelCase splits at lower-to-upper and acronym boundaries
//   - letter/digit boundaries split ("x2y" -> "x", "2", "y")
//   - alphabetic tokens are lowercased
class HeuristicTokenizer : public Tokenizer {
 public:
  std::vector<std::string> split(const std::string& text) const override;
};

// Greedy longest-match against a fixed sub-word inventory, for parity with an
// externally trained vocabulary. Words (maximal identifier-character runs) are
// matched left to right, preferring the longest vocabulary entry; characters
// with no match become single-character tokens.
class SubwordVocabTokenizer : public Tokenizer {
 public:
  explicit SubwordVocabTokenizer(const Vocabulary* vocab);
  std::vector<std::string> split(const std::string& text) const override;

 private:
  const Vocabulary* vocab_;
  size_t max_len_;
};

// Token sequence with parallel surface strings and vocabulary ids.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<int> ids;
};

// Split `code`, map to ids (UNK for out-of-vocabulary), truncate to max_len.
TokenSequence tokenize(const std::string& code, const Vocabulary& vocab,
                       const Tokenizer& tokenizer, int max_len);

}  // namespace gypsum
