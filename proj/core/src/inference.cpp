#include "gypsum/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "gypsum/errors.hpp"

namespace gypsum {

namespace {

// An in-flight hypothesis. `state` is the decode state AFTER consuming every
// id except the last one; the pending last id is consumed when the
// hypothesis expands. Children of one parent share the parent's advanced
// state, so each expansion copies the state exactly once.
struct OpenHyp {
  std::shared_ptr<const std::any> state;
  std::vector<int> ids;
  double logprob = 0.0;
  std::vector<std::vector<double>> attn_c, attn_g;
};

double ranking_key(double logprob, size_t len, bool length_normalize) {
  if (!length_normalize || len == 0) return logprob;
  return logprob / static_cast<double>(len);
}

SummaryHypothesis finalize(OpenHyp&& h, bool length_normalize) {
  SummaryHypothesis out;
  out.ids = std::move(h.ids);
  out.logprob = h.logprob;
  out.score = ranking_key(h.logprob, out.ids.size(), length_normalize);
  out.attn_c = std::move(h.attn_c);
  out.attn_g = std::move(h.attn_g);
  return out;
}

}  // namespace

std::vector<SummaryHypothesis> beam_search_core(const DecodeProblem& prob,
                                                int k, bool length_normalize) {
  if (k < 1) throw ConfigError("beam width must be at least 1");
  const int eos = prob.eos_id();
  const int cap = prob.max_steps();

  auto key = [&](const OpenHyp& h) {
    return ranking_key(h.logprob, h.ids.size(), length_normalize);
  };

  std::vector<OpenHyp> open(1);
  open[0].state = std::make_shared<const std::any>(prob.initial_state());
  std::vector<SummaryHypothesis> finished;

  for (int step = 0; step < cap && !open.empty(); ++step) {
    std::vector<OpenHyp> candidates;
    candidates.reserve(open.size() * static_cast<size_t>(k));
    for (OpenHyp& h : open) {
      std::any st = *h.state;  // fork the parent state
      DecodeStepOutput out =
          prob.advance(st, h.ids.empty() ? -1 : h.ids.back());
      auto advanced = std::make_shared<const std::any>(std::move(st));

      // k best next tokens; ties break toward the lower id (argmax first).
      std::vector<int> order(out.log_probs.size());
      std::iota(order.begin(), order.end(), 0);
      size_t width = std::min<size_t>(static_cast<size_t>(k), order.size());
      std::partial_sort(order.begin(), order.begin() + width, order.end(),
                        [&](int a, int b) {
                          if (out.log_probs[a] != out.log_probs[b])
                            return out.log_probs[a] > out.log_probs[b];
                          return a < b;
                        });
      for (size_t r = 0; r < width; ++r) {
        OpenHyp child;
        child.state = advanced;
        child.ids = h.ids;
        child.ids.push_back(order[r]);
        child.logprob = h.logprob + out.log_probs[order[r]];
        child.attn_c = h.attn_c;
        child.attn_g = h.attn_g;
        if (!out.attn_c.empty()) child.attn_c.push_back(out.attn_c);
        if (!out.attn_g.empty()) child.attn_g.push_back(out.attn_g);
        candidates.push_back(std::move(child));
      }
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](const OpenHyp& a, const OpenHyp& b) {
                       return key(a) > key(b);
                     });
    open.clear();
    for (OpenHyp& c : candidates) {
      if (c.ids.back() == eos) {
        finished.push_back(finalize(std::move(c), length_normalize));
      } else if (open.size() < static_cast<size_t>(k)) {
        open.push_back(std::move(c));
      }
    }
    std::stable_sort(finished.begin(), finished.end(),
                     [](const SummaryHypothesis& a, const SummaryHypothesis& b) {
                       return a.score > b.score;
                     });
    if (finished.size() > static_cast<size_t>(k))
      finished.resize(static_cast<size_t>(k));

    // The best open hypothesis competes with the k-th finished one.
    if (finished.size() == static_cast<size_t>(k) &&
        (open.empty() || key(open.front()) <= finished.back().score))
      break;
  }

  // Hypotheses still open at the cap end without EOS.
  for (OpenHyp& h : open)
    finished.push_back(finalize(std::move(h), length_normalize));
  std::stable_sort(finished.begin(), finished.end(),
                   [](const SummaryHypothesis& a, const SummaryHypothesis& b) {
                     return a.score > b.score;
                   });
  if (finished.size() > static_cast<size_t>(k))
    finished.resize(static_cast<size_t>(k));
  return finished;
}

namespace {

// Adapts GypsumModel's incremental decoder to the search interface.
class ModelProblem : public DecodeProblem {
 public:
  ModelProblem(const GypsumModel& m, const SnippetEncoding& se)
      : m_(m), se_(se) {}

  int eos_id() const override { return Vocabulary::kEos; }
  int max_steps() const override { return m_.cfg.l_s; }
  std::any initial_state() const override { return DecodeState{}; }

  DecodeStepOutput advance(std::any& state, int last_token) const override {
    DecodeState& st = std::any_cast<DecodeState&>(state);
    int input =
        last_token < 0 ? Vocabulary::kBos : feedback_id(se_.ext, last_token);
    ForwardContext ctx;  // evaluation mode
    StepDistribution d = decode_step(m_, se_, st, input, ctx);
    DecodeStepOutput out;
    const std::vector<double>& p = d.merged.value();
    out.log_probs.reserve(p.size());
    for (double v : p) out.log_probs.push_back(std::log(std::max(v, 1e-300)));
    out.attn_c = d.a_c.value();
    out.attn_g = d.a_g.value();
    return out;
  }

 private:
  const GypsumModel& m_;
  const SnippetEncoding& se_;
};

std::string surface_text(const GypsumModel& m, const SnippetEncoding& se,
                         const std::vector<int>& ids) {
  std::string text;
  for (int id : ids) {
    if (id == Vocabulary::kEos) continue;
    if (!text.empty()) text += ' ';
    text += se.ext.token_of(m.vocab, id);
  }
  return text;
}

}  // namespace

std::vector<SummaryHypothesis> beam_search(const GypsumModel& m,
                                           const SnippetEncoding& se, int k) {
  NoGradGuard guard;
  ModelProblem prob(m, se);
  std::vector<SummaryHypothesis> hyps =
      beam_search_core(prob, k, m.cfg.length_normalize);
  for (SummaryHypothesis& h : hyps) h.text = surface_text(m, se, h.ids);
  return hyps;
}

SummaryHypothesis greedy_decode(const GypsumModel& m,
                                const SnippetEncoding& se) {
  NoGradGuard guard;
  ForwardContext ctx;
  SummaryHypothesis h;
  DecodeState st;
  int input = Vocabulary::kBos;
  for (int step = 0; step < m.cfg.l_s; ++step) {
    StepDistribution d = decode_step(m, se, st, input, ctx);
    const std::vector<double>& p = d.merged.value();
    int best = static_cast<int>(
        std::max_element(p.begin(), p.end()) - p.begin());
    h.ids.push_back(best);
    h.logprob += std::log(std::max(p[static_cast<size_t>(best)], 1e-300));
    h.attn_c.push_back(d.a_c.value());
    h.attn_g.push_back(d.a_g.value());
    if (best == Vocabulary::kEos) break;
    input = feedback_id(se.ext, best);
  }
  h.score = m.cfg.length_normalize && !h.ids.empty()
                ? h.logprob / static_cast<double>(h.ids.size())
                : h.logprob;
  h.text = surface_text(m, se, h.ids);
  return h;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> combine_attributions(
    const std::vector<std::vector<double>>& dec_rows,
    const std::vector<std::vector<double>>& gat_rows) {
  size_t n_leaves = gat_rows.empty() ? 0 : gat_rows.front().size();
  for (const auto& g : gat_rows)
    if (g.size() != n_leaves)
      throw ShapeMismatch("attribution: ragged graph attention rows");
  std::vector<std::vector<double>> out;
  out.reserve(dec_rows.size());
  for (const auto& dec : dec_rows) {
    if (dec.size() < gat_rows.size())
      throw ShapeMismatch("attribution: decoder row shorter than column count");
    std::vector<double> row(n_leaves, 0.0);
    for (size_t p = 0; p < gat_rows.size(); ++p)
      for (size_t i = 0; i < n_leaves; ++i)
        row[i] += dec[p] * gat_rows[p][i];
    out.push_back(std::move(row));
  }
  return out;
}

AttributionMatrix attribution(const GypsumModel& m, const SnippetEncoding& se,
                              const HeuristicTokenizer& tok,
                              const std::string& summary) {
  NoGradGuard guard;
  TargetPair tp = make_targets(m.vocab, se.ext, tok, summary, m.cfg.l_s);
  ForwardContext ctx;
  TrainingForward fwd = forward_steps(m, se, tp.input_ids, ctx);

  const NodeOrdering& ordering = se.enc_g.ordering;
  size_t n_sel = ordering.selected.size();

  AttributionMatrix am;
  // Leaf columns: selected positions flagged as leaves, in feed order.
  std::vector<size_t> leaf_cols;
  for (size_t q = 0; q < n_sel; ++q) {
    if (se.masks.leaf[q]) {
      leaf_cols.push_back(q);
      am.leaves.push_back(se.leaf_texts[q]);
      am.leaf_nodes.push_back(ordering.selected[q]);
    }
  }

  // Column index per selected node id.
  int max_id = 0;
  for (int id : ordering.selected) max_id = std::max(max_id, id);
  std::vector<int> col_of(static_cast<size_t>(max_id) + 1, -1);
  for (size_t q = 0; q < n_sel; ++q)
    col_of[static_cast<size_t>(ordering.selected[q])] = static_cast<int>(q);
  std::vector<int> leaf_col_of(n_sel, -1);
  for (size_t c = 0; c < leaf_cols.size(); ++c)
    leaf_col_of[leaf_cols[c]] = static_cast<int>(c);

  // gat[p][i]: last-layer attention of selected node p over leaf column i,
  // summed over parallel edges.
  std::vector<std::vector<double>> gat(
      n_sel, std::vector<double>(leaf_cols.size(), 0.0));
  const EdgeBatch& batch = se.enc_g.batch;
  const std::vector<double>& attn = se.enc_g.edge_attn.value();
  auto selected_col = [&](int node) {
    return node >= 0 && node <= max_id ? col_of[static_cast<size_t>(node)]
                                       : -1;
  };
  for (size_t e = 0; e < batch.src.size(); ++e) {
    int dst_col = selected_col(batch.dst[e]);
    int src_col = selected_col(batch.src[e]);
    if (dst_col < 0 || src_col < 0) continue;
    int leaf = leaf_col_of[static_cast<size_t>(src_col)];
    if (leaf < 0) continue;
    gat[static_cast<size_t>(dst_col)][static_cast<size_t>(leaf)] +=
        attn[e];
  }

  // One decoder attention row per summary token: row t generated token t+1
  // of the BOS-led input, so the final row (which predicts EOS) is dropped.
  size_t n_tokens = tp.input_ids.size() - 1;
  const std::vector<double>& dec = fwd.dec.attn_g.value();
  size_t l_g = static_cast<size_t>(m.cfg.l_g);
  std::vector<std::vector<double>> dec_rows;
  dec_rows.reserve(n_tokens);
  for (size_t t = 0; t < n_tokens; ++t)
    dec_rows.emplace_back(dec.begin() + static_cast<long>(t * l_g),
                          dec.begin() + static_cast<long>(t * l_g + n_sel));

  am.matrix = combine_attributions(dec_rows, gat);
  std::vector<std::string> words = tok.split(summary);
  words.resize(n_tokens);
  am.tokens = std::move(words);
  return am;
}

std::string attribution_to_json(const AttributionMatrix& am) {
  nlohmann::json j;
  j["tokens"] = am.tokens;
  j["leaves"] = am.leaves;
  j["leaf_nodes"] = am.leaf_nodes;
  j["matrix"] = am.matrix;
  return j.dump();
}

}  // namespace gypsum
