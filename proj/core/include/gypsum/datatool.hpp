#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gypsum/ast.hpp"

namespace gypsum {

// JSON-lines dataset IO. Each line is one object with string fields
// "id", "code", "language" ("java" | "python"), and "summary" (optional,
// defaults to empty — inference inputs may omit it).
std::vector<SourceSnippet> load_dataset(const std::string& path);
void save_dataset(const std::string& path,
                  const std::vector<SourceSnippet>& data);

// Longest-common-subsequence similarity in [0, 1]:
//   lcs(a, b) / max(|a|, |b|), and 1.0 when both sides are empty.
// Token mode compares sub-word token sequences; char mode compares raw
// character sequences.
double lcs_similarity(const std::vector<std::string>& a,
                      const std::vector<std::string>& b);
double lcs_similarity_chars(const std::string& a, const std::string& b);

// Similarity of two snippets' code under the configured mode.
double code_similarity(const SourceSnippet& a, const SourceSnippet& b,
                       bool char_mode);

// Deduplication report: for every test record, the maximum similarity
// against any train record, and whether it is removed (score == 1.0).
struct DedupEntry {
  std::string id;
  double max_score = 0.0;
  std::string nearest_train_id;
  bool removed = false;
};
struct DedupReport {
  std::vector<DedupEntry> entries;        // one per test record, input order
  std::vector<SourceSnippet> kept;        // test records that survive
  std::vector<long long> histogram;       // 20 bins of width 0.05 over scores
};
DedupReport dedup_against_train(const std::vector<SourceSnippet>& train,
                                const std::vector<SourceSnippet>& test,
                                bool char_mode);

// Histogram CSV: header "bin_low,bin_high,count", 20 rows, bin edges at
// multiples of 0.05; a score of exactly 1.0 falls in the last bin.
void write_histogram_csv(const std::string& path,
                         const std::vector<long long>& histogram);

}  // namespace gypsum
