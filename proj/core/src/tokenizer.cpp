#include "gypsum/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "gypsum/errors.hpp"

namespace gypsum {

namespace {

inline bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }
inline bool is_lower(unsigned char c) { return std::islower(c); }
inline bool is_upper(unsigned char c) { return std::isupper(c); }
inline bool is_digit(unsigned char c) { return std::isdigit(c); }

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Split a run of letters/digits (no underscores) at camelCase, acronym and
// letter/digit boundaries, lowercasing the pieces.
void split_camel(const std::string& seg, std::vector<std::string>& out) {
  size_t start = 0;
  for (size_t i = 1; i <= seg.size(); ++i) {
    bool cut = false;
    if (i == seg.size()) {
      cut = true;
    } else {
      unsigned char prev = seg[i - 1], cur = seg[i];
      if (is_lower(prev) && is_upper(cur)) cut = true;                       // aB
      else if (is_digit(prev) != is_digit(cur)) cut = true;                  // a1, 1a
      else if (is_upper(prev) && is_upper(cur) && i + 1 < seg.size() &&
               is_lower(static_cast<unsigned char>(seg[i + 1])))
        cut = true;  // HTTPServer -> HTTP | Server
    }
    if (cut) {
      out.push_back(to_lower(seg.substr(start, i - start)));
      start = i;
    }
  }
}

}  // namespace

std::vector<std::string> HeuristicTokenizer::split(const std::string& text) const {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (!is_word_char(c)) {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
    // Identifier run [i, j): underscores are kept as their own tokens.
    size_t seg_start = i;
    for (size_t k = i; k <= j; ++k) {
      if (k == j || text[k] == '_') {
        if (k > seg_start) split_camel(text.substr(seg_start, k - seg_start), out);
        if (k < j) out.emplace_back("_");
        seg_start = k + 1;
      }
    }
    i = j;
  }
  return out;
}

SubwordVocabTokenizer::SubwordVocabTokenizer(const Vocabulary* vocab)
    : vocab_(vocab), max_len_(1) {
  if (!vocab_) throw DataError("sub-word tokenizer needs a vocabulary");
  for (int k = 0; k < vocab_->size(); ++k)
    max_len_ = std::max(max_len_, vocab_->token(k).size());
}

std::vector<std::string> SubwordVocabTokenizer::split(const std::string& text) const {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  auto match_greedy = [&](size_t lo, size_t hi) {
    size_t p = lo;
    while (p < hi) {
      size_t best = 1;
      size_t cap = std::min(max_len_, hi - p);
      for (size_t len = cap; len >= 2; --len) {
        if (vocab_->contains(text.substr(p, len))) {
          best = len;
          break;
        }
      }
      out.push_back(text.substr(p, best));
      p += best;
    }
  };
  while (i < n) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (!is_word_char(c)) {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
    match_greedy(i, j);
    i = j;
  }
  return out;
}

TokenSequence tokenize(const std::string& code, const Vocabulary& vocab,
                       const Tokenizer& tokenizer, int max_len) {
  if (max_len < 0) throw LengthError("tokenize: negative length limit");
  TokenSequence seq;
  seq.tokens = tokenizer.split(code);
  if (static_cast<int>(seq.tokens.size()) > max_len)
    seq.tokens.resize(static_cast<size_t>(max_len));
  seq.ids.reserve(seq.tokens.size());
  for (const auto& t : seq.tokens) seq.ids.push_back(vocab.id(t));
  return seq;
}

}  // namespace gypsum
