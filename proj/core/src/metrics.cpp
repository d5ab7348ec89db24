#include "gypsum/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>

#include "gypsum/errors.hpp"
#include "gypsum/tokenizer.hpp"

namespace gypsum {

namespace {

constexpr double kBleuEps = 1e-9;
constexpr double kMeteorAlpha = 0.9;
constexpr double kMeteorBeta = 3.0;
constexpr double kMeteorGamma = 0.5;

size_t lcs_length(const std::vector<std::string>& a,
                  const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// ---------------------------------------------------------------------------
// Porter stemmer (the original suffix-stripping algorithm). A consonant is a
// letter other than a/e/i/o/u, and other than y preceded by a consonant; the
// measure m counts VC sequences in the [C](VC)^m[V] decomposition.
class Porter {
 public:
  explicit Porter(std::string word) : w_(std::move(word)) {}

  std::string run() {
    if (w_.size() <= 2) return w_;
    step1a();
    step1b();
    step1c();
    step2();
    step3();
    step4();
    step5a();
    step5b();
    return w_;
  }

 private:
  std::string w_;

  bool is_consonant(size_t i) const {
    char c = w_[i];
    if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
    if (c == 'y') return i == 0 ? true : !is_consonant(i - 1);
    return true;
  }

  // Measure of the prefix w_[0..end).
  int measure(size_t end) const {
    int m = 0;
    size_t i = 0;
    while (i < end && is_consonant(i)) ++i;
    while (i < end) {
      while (i < end && !is_consonant(i)) ++i;
      if (i >= end) break;
      while (i < end && is_consonant(i)) ++i;
      ++m;
    }
    return m;
  }

  bool has_vowel(size_t end) const {
    for (size_t i = 0; i < end; ++i)
      if (!is_consonant(i)) return true;
    return false;
  }

  // *d: the prefix ends with a double consonant.
  bool double_consonant(size_t end) const {
    return end >= 2 && w_[end - 1] == w_[end - 2] && is_consonant(end - 1);
  }

  // *o: the prefix ends consonant-vowel-consonant where the final consonant
  // is not w, x, or y.
  bool ends_cvc(size_t end) const {
    if (end < 3) return false;
    if (!is_consonant(end - 3) || is_consonant(end - 2) ||
        !is_consonant(end - 1))
      return false;
    char c = w_[end - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(const char* s) const {
    size_t n = std::strlen(s);
    return w_.size() >= n && w_.compare(w_.size() - n, n, s) == 0;
  }

  void chop(size_t n) { w_.erase(w_.size() - n); }

  // If the word ends with `suffix` and the measure of the remaining stem
  // exceeds `min_m`, replace the suffix. Returns true when the suffix
  // matched (whether or not the condition held), ending the step.
  bool replace(const char* suffix, const char* repl, int min_m) {
    if (!ends(suffix)) return false;
    size_t stem = w_.size() - std::strlen(suffix);
    if (measure(stem) > min_m) w_ = w_.substr(0, stem) + repl;
    return true;
  }

  void step1a() {
    if (ends("sses")) {
      chop(2);
    } else if (ends("ies")) {
      chop(2);
    } else if (ends("ss")) {
      // unchanged
    } else if (ends("s")) {
      chop(1);
    }
  }

  void step1b() {
    if (ends("eed")) {
      if (measure(w_.size() - 3) > 0) chop(1);
      return;
    }
    bool stripped = false;
    if (ends("ed") && has_vowel(w_.size() - 2)) {
      chop(2);
      stripped = true;
    } else if (ends("ing") && has_vowel(w_.size() - 3)) {
      chop(3);
      stripped = true;
    }
    if (!stripped) return;
    if (ends("at") || ends("bl") || ends("iz")) {
      w_ += 'e';
    } else if (double_consonant(w_.size()) && !ends("l") && !ends("s") &&
               !ends("z")) {
      chop(1);
    } else if (measure(w_.size()) == 1 && ends_cvc(w_.size())) {
      w_ += 'e';
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(w_.size() - 1)) w_[w_.size() - 1] = 'i';
  }

  void step2() {
    static const std::pair<const char*, const char*> kRules[] = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},
        {"anci", "ance"},   {"izer", "ize"},    {"abli", "able"},
        {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},
        {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},
        {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},
        {"iviti", "ive"},   {"biliti", "ble"},
    };
    for (const auto& [suf, rep] : kRules)
      if (replace(suf, rep, 0)) return;
  }

  void step3() {
    static const std::pair<const char*, const char*> kRules[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    };
    for (const auto& [suf, rep] : kRules)
      if (replace(suf, rep, 0)) return;
  }

  void step4() {
    static const char* kSuffixes[] = {
        "al",  "ance", "ence", "er",    "ic",   "able", "ible",
        "ant", "ement", "ment", "ent",  "ion",  "ou",   "ism",
        "ate", "iti",  "ous",  "ive",  "ize",
    };
    for (const char* suf : kSuffixes) {
      if (!ends(suf)) continue;
      size_t stem = w_.size() - std::strlen(suf);
      if (std::strcmp(suf, "ion") == 0 &&
          !(stem > 0 && (w_[stem - 1] == 's' || w_[stem - 1] == 't')))
        return;
      if (measure(stem) > 1) chop(std::strlen(suf));
      return;
    }
  }

  void step5a() {
    if (!ends("e")) return;
    size_t stem = w_.size() - 1;
    int m = measure(stem);
    if (m > 1 || (m == 1 && !ends_cvc(stem))) chop(1);
  }

  void step5b() {
    if (measure(w_.size()) > 1 && double_consonant(w_.size()) && ends("l"))
      chop(1);
  }
};

}  // namespace

std::string porter_stem(const std::string& word) {
  std::string lower;
  lower.reserve(word.size());
  for (char c : word)
    lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return Porter(std::move(lower)).run();
}

double bleu(const std::vector<std::string>& hyp,
            const std::vector<std::string>& ref) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, long long> ref_counts;
    for (size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
    std::map<std::vector<std::string>, long long> hyp_counts;
    long long total = 0;
    for (size_t i = 0; i + n <= hyp.size(); ++i) {
      ++hyp_counts[{hyp.begin() + i, hyp.begin() + i + n}];
      ++total;
    }
    long long matched = 0;
    for (const auto& [gram, count] : hyp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    log_sum += std::log((static_cast<double>(matched) + kBleuEps) /
                        (static_cast<double>(total) + kBleuEps));
  }
  double brevity =
      hyp.size() >= ref.size()
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref.size()) / hyp.size());
  return 100.0 * brevity * std::exp(log_sum / 4.0);
}

double rouge_l(const std::vector<std::string>& hyp,
               const std::vector<std::string>& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  size_t lcs = lcs_length(hyp, ref);
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / hyp.size();
  double r = static_cast<double>(lcs) / ref.size();
  return 100.0 * 2.0 * p * r / (p + r);
}

double meteor(const std::vector<std::string>& hyp,
              const std::vector<std::string>& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;

  // Stage 1: exact surface matches; stage 2: stem matches on the leftovers.
  // Each hypothesis token pairs with the first still-unmatched reference
  // token, scanning left to right.
  std::vector<int> match_of(hyp.size(), -1);
  std::vector<char> ref_used(ref.size(), 0);
  for (size_t i = 0; i < hyp.size(); ++i)
    for (size_t j = 0; j < ref.size(); ++j)
      if (!ref_used[j] && hyp[i] == ref[j]) {
        match_of[i] = static_cast<int>(j);
        ref_used[j] = 1;
        break;
      }
  std::vector<std::string> ref_stems(ref.size());
  for (size_t j = 0; j < ref.size(); ++j) ref_stems[j] = porter_stem(ref[j]);
  for (size_t i = 0; i < hyp.size(); ++i) {
    if (match_of[i] >= 0) continue;
    std::string stem = porter_stem(hyp[i]);
    for (size_t j = 0; j < ref.size(); ++j)
      if (!ref_used[j] && stem == ref_stems[j]) {
        match_of[i] = static_cast<int>(j);
        ref_used[j] = 1;
        break;
      }
  }

  long long m = 0;
  for (int j : match_of) m += j >= 0;
  if (m == 0) return 0.0;

  double p = static_cast<double>(m) / hyp.size();
  double r = static_cast<double>(m) / ref.size();
  double f_mean = p * r / (kMeteorAlpha * p + (1.0 - kMeteorAlpha) * r);

  // A chunk is a maximal run of matches contiguous on both sides.
  long long chunks = 0;
  int prev_i = -2, prev_j = -2;
  for (size_t i = 0; i < hyp.size(); ++i) {
    if (match_of[i] < 0) continue;
    if (static_cast<int>(i) != prev_i + 1 || match_of[i] != prev_j + 1)
      ++chunks;
    prev_i = static_cast<int>(i);
    prev_j = match_of[i];
  }
  // Single-chunk alignments carry no penalty so that an exact reproduction
  // of the reference scores 100.
  double penalty =
      chunks <= 1 ? 0.0
                  : kMeteorGamma * std::pow(static_cast<double>(chunks) / m,
                                            kMeteorBeta);
  return 100.0 * f_mean * (1.0 - penalty);
}

std::vector<std::string> metric_tokens(const std::string& text) {
  HeuristicTokenizer tok;
  return tok.split(text);
}

MetricReport evaluate_corpus(const std::vector<std::vector<std::string>>& hyps,
                             const std::vector<std::vector<std::string>>& refs) {
  if (hyps.size() != refs.size())
    throw ShapeMismatch("evaluate_corpus: " + std::to_string(hyps.size()) +
                        " hypotheses vs " + std::to_string(refs.size()) +
                        " references");
  if (hyps.empty()) throw DataError("evaluate_corpus: empty input");
  MetricReport rep;
  rep.bleu_scores.reserve(hyps.size());
  rep.meteor_scores.reserve(hyps.size());
  rep.rouge_scores.reserve(hyps.size());
  for (size_t i = 0; i < hyps.size(); ++i) {
    rep.bleu_scores.push_back(bleu(hyps[i], refs[i]));
    rep.meteor_scores.push_back(meteor(hyps[i], refs[i]));
    rep.rouge_scores.push_back(rouge_l(hyps[i], refs[i]));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  rep.bleu = mean(rep.bleu_scores);
  rep.meteor = mean(rep.meteor_scores);
  rep.rouge_l = mean(rep.rouge_scores);
  return rep;
}

}  // namespace gypsum
