#include "gypsum/datatool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gypsum/errors.hpp"
#include "gypsum/tokenizer.hpp"

namespace gypsum {

std::vector<SourceSnippet> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open dataset: " + path);
  std::vector<SourceSnippet> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Skip blank lines (trailing newline artifacts).
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(lineno) +
                      " is not valid JSON: " + e.what());
    }
    try {
      SourceSnippet s;
      s.id = j.at("id").get<std::string>();
      s.code = j.at("code").get<std::string>();
      s.language = language_from_string(j.at("language").get<std::string>());
      s.summary = j.value("summary", std::string());
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(lineno) +
                      " lacks a required field: " + e.what());
    }
  }
  return out;
}

void save_dataset(const std::string& path,
                  const std::vector<SourceSnippet>& data) {
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write dataset: " + path);
  for (const auto& s : data) {
    nlohmann::json j{{"id", s.id},
                     {"code", s.code},
                     {"language", to_string(s.language)},
                     {"summary", s.summary}};
    out << j.dump() << "\n";
  }
}

namespace {

// Rolling two-row LCS length.
template <typename Seq>
int lcs_length(const Seq& a, const Seq& b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

template <typename Seq>
double lcs_score(const Seq& a, const Seq& b) {
  if (a.empty() && b.empty()) return 1.0;
  const size_t mx = std::max(a.size(), b.size());
  if (a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin()))
    return 1.0;
  return double(lcs_length(a, b)) / double(mx);
}

}  // namespace

double lcs_similarity(const std::vector<std::string>& a,
                      const std::vector<std::string>& b) {
  return lcs_score(a, b);
}

double lcs_similarity_chars(const std::string& a, const std::string& b) {
  return lcs_score(a, b);
}

double code_similarity(const SourceSnippet& a, const SourceSnippet& b,
                       bool char_mode) {
  if (char_mode) return lcs_similarity_chars(a.code, b.code);
  HeuristicTokenizer tok;
  return lcs_similarity(tok.split(a.code), tok.split(b.code));
}

DedupReport dedup_against_train(const std::vector<SourceSnippet>& train,
                                const std::vector<SourceSnippet>& test,
                                bool char_mode) {
  HeuristicTokenizer tok;
  // Pre-tokenize once; in char mode compare the raw code strings.
  std::vector<std::vector<std::string>> train_toks, test_toks;
  if (!char_mode) {
    train_toks.reserve(train.size());
    for (const auto& s : train) train_toks.push_back(tok.split(s.code));
    test_toks.reserve(test.size());
    for (const auto& s : test) test_toks.push_back(tok.split(s.code));
  }

  DedupReport rep;
  rep.histogram.assign(20, 0);
  rep.entries.reserve(test.size());
  for (size_t t = 0; t < test.size(); ++t) {
    DedupEntry e;
    e.id = test[t].id;
    for (size_t r = 0; r < train.size(); ++r) {
      const size_t la = char_mode ? test[t].code.size() : test_toks[t].size();
      const size_t lb = char_mode ? train[r].code.size() : train_toks[r].size();
      const size_t mx = std::max(la, lb);
      // Length filter: LCS <= min length, so the score cannot exceed
      // min/max; when that bound cannot beat the current best, skip the DP.
      // Ties keep the first maximizer, which the skip preserves.
      const double bound = mx == 0 ? 1.0 : double(std::min(la, lb)) / double(mx);
      if (bound <= e.max_score && !e.nearest_train_id.empty()) continue;
      const double score =
          char_mode ? lcs_similarity_chars(test[t].code, train[r].code)
                    : lcs_similarity(test_toks[t], train_toks[r]);
      if (score > e.max_score || e.nearest_train_id.empty()) {
        if (score >= e.max_score) {
          e.max_score = score;
          e.nearest_train_id = train[r].id;
        }
      }
      if (e.max_score == 1.0) break;  // cannot improve further
    }
    e.removed = (e.max_score == 1.0);
    // Bin at multiples of 0.05; the epsilon keeps ratio scores that are
    // mathematically on a boundary (like 3/20) in their upper bin despite
    // falling representably below it.
    int bin = std::min(
        19, static_cast<int>(std::floor(e.max_score * 20.0 + 1e-9)));
    ++rep.histogram[static_cast<size_t>(bin)];
    if (!e.removed) rep.kept.push_back(test[t]);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

void write_histogram_csv(const std::string& path,
                         const std::vector<long long>& histogram) {
  if (histogram.size() != 20)
    throw ShapeMismatch("histogram must have exactly 20 bins");
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write histogram: " + path);
  out << "bin_low,bin_high,count\n";
  char buf[64];
  for (int i = 0; i < 20; ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,%lld\n", i * 0.05,
                  (i + 1) * 0.05, histogram[static_cast<size_t>(i)]);
    out << buf;
  }
}

}  // namespace gypsum
