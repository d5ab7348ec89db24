#include "gypsum/model.hpp"

#include <cmath>

#include "gypsum/errors.hpp"

namespace gypsum {

GypsumModel::GypsumModel(const RunConfig& config, Vocabulary vocabulary,
                         KindRegistry kind_registry)
    : cfg(config),
      vocab(std::move(vocabulary)),
      kinds(std::move(kind_registry)),
      params(cfg.seed) {
  tok_emb = params.create("emb.token",
                          {static_cast<int>(vocab.size()), cfg.d_model},
                          Init::FanIn);
  cencoder = make_cencoder(params, "cenc", cfg, tok_emb);
  gencoder = make_gencoder(params, "genc", cfg, tok_emb,
                           static_cast<int>(kinds.size()));
  decoder = make_decoder(params, "dec", cfg);
  copygen = make_copygen(params, "head", cfg.d_e,
                         static_cast<int>(vocab.size()));
}

ControlEdgeOptions control_options(const RunConfig& cfg) {
  ControlEdgeOptions opt;
  opt.if_else = cfg.control_if;
  opt.loop_while = cfg.control_while;
  opt.loop_for = cfg.control_for;
  opt.loop_foreach = cfg.control_foreach;
  opt.switch_case = cfg.control_switch;
  return opt;
}

SnippetEncoding encode_snippet(const GypsumModel& m, const std::string& code,
                               const SemanticGraph& g, const Tokenizer& tok,
                               const ForwardContext& ctx) {
  SnippetEncoding se;
  se.tokens = tokenize(code, m.vocab, tok, m.cfg.l_c);
  se.enc_c = encode_tokens(m.cencoder, se.tokens.ids, m.cfg, ctx);
  se.enc_g = encode_graph(m.gencoder, g, m.vocab, m.kinds, m.cfg, ctx);

  const size_t n_tok = se.tokens.tokens.size();
  se.masks.code.assign(static_cast<size_t>(m.cfg.l_c), 0);
  se.code_texts.assign(static_cast<size_t>(m.cfg.l_c), std::string());
  for (size_t i = 0; i < n_tok; ++i) {
    se.masks.code[i] = 1;
    se.code_texts[i] = se.tokens.tokens[i];
  }

  se.masks.leaf.assign(static_cast<size_t>(m.cfg.l_g), 0);
  se.leaf_texts.assign(static_cast<size_t>(m.cfg.l_g), std::string());
  const NodeOrdering& ord = se.enc_g.ordering;
  for (size_t p = 0; p < ord.selected.size(); ++p) {
    const AstNode& node = g.ast.node(ord.selected[p]);
    if (node.leaf) {
      se.masks.leaf[p] = 1;
      se.leaf_texts[p] = node.text;
    }
  }

  se.ext = build_extended_vocab(m.vocab, se.code_texts, se.leaf_texts, se.masks);
  return se;
}

TargetPair make_targets(const Vocabulary& vocab, const ExtendedVocab& ext,
                        const Tokenizer& tok, const std::string& summary,
                        int l_s) {
  TargetPair tp;
  std::vector<std::string> words = tok.split(summary);
  if (static_cast<int>(words.size()) > l_s - 1)
    words.resize(static_cast<size_t>(l_s - 1));
  tp.input_ids.reserve(words.size() + 1);
  tp.input_ids.push_back(Vocabulary::kBos);
  tp.expect_ids_ext.reserve(words.size() + 1);
  for (const auto& w : words) {
    tp.input_ids.push_back(vocab.id(w));
    tp.expect_ids_ext.push_back(ext.id_of(vocab, w));
  }
  tp.expect_ids_ext.push_back(Vocabulary::kEos);
  tp.expect_text = std::move(words);
  return tp;
}

TrainingForward forward_steps(const GypsumModel& m, const SnippetEncoding& se,
                              const std::vector<int>& input_ids,
                              const ForwardContext& ctx) {
  TrainingForward out;
  out.dec = decode_training(m.decoder, input_ids, se.enc_c, se.enc_g.out,
                            m.cfg, ctx);
  const int T = static_cast<int>(input_ids.size());
  out.steps.reserve(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    out.steps.push_back(step_distribution(
        m.copygen, row(out.dec.states, t), row(out.dec.attn_c, t),
        row(out.dec.attn_g, t), se.masks, se.ext, m.cfg));
  }
  return out;
}

StepDistribution decode_step(const GypsumModel& m, const SnippetEncoding& se,
                             DecodeState& st, int input_id,
                             const ForwardContext& ctx) {
  const int L = static_cast<int>(m.decoder.layers.size());
  if (st.hist.empty()) st.hist.resize(static_cast<size_t>(L));
  if (static_cast<int>(st.hist.size()) != L)
    throw ShapeMismatch("decode state does not match the decoder depth");
  const int t = st.next_pos();
  if (t >= m.cfg.l_s)
    throw LengthError("decode already reached the summary length cap");
  if (input_id < 0 || input_id >= static_cast<int>(m.vocab.size()))
    throw DataError("decoder input id outside the vocabulary");

  Tensor emb = row(gather_rows(m.decoder.tgt_emb, {input_id}), 0);
  Tensor pos = row(gather_rows(m.decoder.pos_emb, {t}), 0);
  Tensor x = add(emb, pos);
  x = ctx_dropout(x, ctx);
  LayerStepResult r;
  for (int l = 0; l < L; ++l) {
    st.hist[static_cast<size_t>(l)].push_back(x);
    Tensor h = stack_rows(st.hist[static_cast<size_t>(l)]);
    r = decoder_layer_step(m.decoder, l, x, h, se.enc_c, se.enc_g.out, m.cfg,
                           ctx);
    x = r.d_out;
  }
  return step_distribution(m.copygen, x, r.attn_c_row, r.attn_g_row, se.masks,
                           se.ext, m.cfg);
}

NllResult nll_loss(const std::vector<std::vector<Tensor>>& seq_step_dists,
                   const std::vector<std::vector<int>>& seq_target_ids) {
  if (seq_step_dists.empty())
    throw DataError("loss over an empty batch");
  if (seq_step_dists.size() != seq_target_ids.size())
    throw ShapeMismatch("one target-id list per step-distribution list");

  constexpr double kFloor = 1e-12;
  NllResult res;
  Tensor total;
  for (size_t i = 0; i < seq_step_dists.size(); ++i) {
    const auto& dists = seq_step_dists[i];
    const auto& ids = seq_target_ids[i];
    if (dists.size() != ids.size())
      throw ShapeMismatch("one merged distribution per target position");
    if (dists.empty()) throw DataError("empty target sequence in loss");
    for (size_t t = 0; t < dists.size(); ++t) {
      Tensor term;
      if (ids[t] < 0) {
        // Target unreachable: probability is exactly zero, clamp applies.
        term = Tensor::full({1}, -std::log(kFloor));
        ++res.clamped;
      } else {
        Tensor p = pick(dists[t], ids[t]);
        if (p.value()[0] <= kFloor) ++res.clamped;
        term = neg(log_t(clamp_min(p, kFloor)));
      }
      total = total.defined() ? add(total, term) : term;
    }
  }
  res.loss = scale(total, 1.0 / double(seq_step_dists.size()));
  return res;
}

}  // namespace gypsum
