#pragma once

#include <any>
#include <memory>
#include <string>
#include <vector>

#include "gypsum/model.hpp"

namespace gypsum {

// One decoded candidate summary.
struct SummaryHypothesis {
  std::vector<int> ids;   // extended-vocab ids; ends with EOS unless the
                          // length cap cut the sequence
  std::string text;       // surface tokens joined with spaces, EOS excluded
  double logprob = 0.0;   // sum of log p over the generated tokens
  double score = 0.0;     // ranking key: logprob, averaged by length when
                          // length normalization is on
  // Fusion-stage attention rows recorded at each generation step.
  std::vector<std::vector<double>> attn_c;
  std::vector<std::vector<double>> attn_g;
};

// What one decode step hands back to the search.
struct DecodeStepOutput {
  std::vector<double> log_probs;        // over the decodable id space
  std::vector<double> attn_c, attn_g;   // may be empty for synthetic problems
};

// The search walks any implementation of this interface, so the same beam
// code runs over the real model and over hand-set toy distributions in
// tests. States fork when hypotheses branch, hence the value-semantic any.
class DecodeProblem {
 public:
  virtual ~DecodeProblem() = default;
  virtual int eos_id() const = 0;
  virtual int max_steps() const = 0;  // hard cap on generated tokens
  virtual std::any initial_state() const = 0;
  // Consumes the previously generated token (-1 on the first call), advances
  // `state`, and returns the distribution over the next token.
  virtual DecodeStepOutput advance(std::any& state, int last_token) const = 0;
};

// Width-k beam search. Each open hypothesis expands with its k best next
// tokens; hypotheses are finalized when they emit EOS (or hit the cap) and
// compete with open ones on the ranking key; the search halts once the best
// open hypothesis can no longer beat the k-th finished one. Ties break
// toward lower token ids, which makes k=1 exactly greedy decoding. Returns
// up to k hypotheses, best first. Surface text is left empty here; the
// model-backed wrappers fill it.
std::vector<SummaryHypothesis> beam_search_core(const DecodeProblem& prob,
                                                int k, bool length_normalize);

// Model-backed decoding over an encoded snippet (no gradients recorded).
std::vector<SummaryHypothesis> beam_search(const GypsumModel& m,
                                           const SnippetEncoding& se, int k);

// Plain argmax decoding; identical to beam_search(..., 1).front().
SummaryHypothesis greedy_decode(const GypsumModel& m,
                                const SnippetEncoding& se);

// ---------------------------------------------------------------------------
// Input attribution: how much each leaf node contributed to each generated
// summary token, summed over the graph-encoder columns the decoder attended
// to. Both attention sets are last-layer, head-averaged.
struct AttributionMatrix {
  std::vector<std::string> tokens;  // summary sub-words, one per row
  std::vector<std::string> leaves;  // leaf surface strings, one per column
  std::vector<int> leaf_nodes;      // graph node ids aligned with columns
  std::vector<std::vector<double>> matrix;  // nonnegative weights
};

// Pure combiner: entry(j, i) = sum_p dec_rows[j][p] * gat_rows[p][i], where
// p ranges over graph-encoder columns and i over leaf columns.
std::vector<std::vector<double>> combine_attributions(
    const std::vector<std::vector<double>>& dec_rows,
    const std::vector<std::vector<double>>& gat_rows);

// Teacher-forces `summary` through the model and combines the decoder's
// graph attention with the last graph-attention layer's edge weights.
AttributionMatrix attribution(const GypsumModel& m, const SnippetEncoding& se,
                              const HeuristicTokenizer& tok,
                              const std::string& summary);

// JSON object {"tokens": [...], "leaves": [...], "matrix": [[...], ...]}.
std::string attribution_to_json(const AttributionMatrix& am);

}  // namespace gypsum
