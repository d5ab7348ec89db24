#pragma once

#include <string>
#include <vector>

namespace gypsum {

// Summary-quality metrics. All operate on pre-tokenized, lowercased token
// sequences and return scores in [0, 100]. Corpus scores are the arithmetic
// mean of per-sentence scores.

// Smoothed sentence BLEU-4: clipped n-gram precisions for n = 1..4 with
// add-epsilon smoothing p_n = (matched + eps) / (total + eps), geometric
// mean, and brevity penalty exp(1 - |ref|/|hyp|) when the hypothesis is
// shorter than the reference. Empty hypothesis scores 0.
double bleu(const std::vector<std::string>& hyp,
            const std::vector<std::string>& ref);

// ROUGE-L: F1 (beta = 1) of LCS-based precision and recall. Scores 0 when
// either side is empty or nothing is shared.
double rouge_l(const std::vector<std::string>& hyp,
               const std::vector<std::string>& ref);

// METEOR with exact and stem matching stages (no synonym stage). Unigram
// F-mean with alpha = 0.9 plus a fragmentation penalty gamma * (chunks/m)^beta
// with beta = 3.0, gamma = 0.5. Alignments of at most one chunk carry no
// penalty, so identical sequences score exactly 100. Empty hypothesis
// scores 0.
double meteor(const std::vector<std::string>& hyp,
              const std::vector<std::string>& ref);

// Porter's suffix-stripping stemmer (the original algorithm; used by the
// METEOR stem stage). Input is lowercased before stemming.
std::string porter_stem(const std::string& word);

// Tokenization used on both hypotheses and references before scoring:
// the same sub-word splitter the model trains on, so that a generated
// sequence equal to its target scores 100 on every metric.
std::vector<std::string> metric_tokens(const std::string& text);

struct MetricReport {
  double bleu = 0.0;
  double meteor = 0.0;
  double rouge_l = 0.0;
  // Per-example sentence scores, aligned with the input order.
  std::vector<double> bleu_scores;
  std::vector<double> meteor_scores;
  std::vector<double> rouge_scores;
};

// Scores every hypothesis against its reference and averages.
// Throws ShapeMismatch when the lists differ in length and DataError when
// they are empty.
MetricReport evaluate_corpus(const std::vector<std::vector<std::string>>& hyps,
                             const std::vector<std::vector<std::string>>& refs);

}  // namespace gypsum
