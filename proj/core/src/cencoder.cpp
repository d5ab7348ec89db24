#include "gypsum/cencoder.hpp"

#include "gypsum/archive.hpp"
#include "gypsum/errors.hpp"
#include "gypsum/vocab.hpp"

namespace gypsum {

CEncoderParams make_cencoder(ParamStore& ps, const std::string& prefix,
                             const RunConfig& cfg, Tensor shared_tok_emb) {
  if (cfg.d_model % cfg.head_c != 0)
    throw ConfigError("d_model must be divisible by head_c");
  if (!shared_tok_emb.defined() || shared_tok_emb.cols() != cfg.d_model)
    throw ShapeMismatch("token embedding width must equal d_model");
  CEncoderParams p;
  p.tok_emb = shared_tok_emb;
  p.pos_emb = ps.create(prefix + ".pos_emb", {cfg.l_c, cfg.d_model}, Init::FanIn);
  p.layers.resize(cfg.L_c);
  for (int l = 0; l < cfg.L_c; ++l) {
    std::string lp = prefix + ".layer." + std::to_string(l);
    auto& layer = p.layers[l];
    layer.self_attn = make_mha(ps, lp + ".attn", cfg.d_model, cfg.d_model, cfg.head_c,
                               cfg.d_k, cfg.d_v, cfg.d_model);
    layer.ln_attn = make_layer_norm(ps, lp + ".ln_attn", cfg.d_model);
    layer.ff = make_feed_forward(ps, lp + ".ff", cfg.d_model, cfg.d_ff);
    layer.ln_ff = make_layer_norm(ps, lp + ".ln_ff", cfg.d_model);
  }
  p.w_c = make_linear(ps, prefix + ".w_c", cfg.d_model, cfg.d_e, /*bias=*/true);
  return p;
}

EncoderOutput encode_tokens(const CEncoderParams& p, const std::vector<int>& token_ids,
                            const RunConfig& cfg, const ForwardContext& ctx) {
  // Trailing padding in the input is equivalent to a shorter sequence, so the
  // encoder's output for real tokens is invariant to how much padding arrives.
  int n = static_cast<int>(token_ids.size());
  while (n > 0 && token_ids[static_cast<size_t>(n - 1)] == Vocabulary::kPad) --n;
  if (n == 0) throw LengthError("token sequence is empty");
  if (n > cfg.l_c)
    throw LengthError("token sequence length " + std::to_string(n) + " exceeds l_c=" +
                      std::to_string(cfg.l_c));

  std::vector<int> padded(static_cast<size_t>(cfg.l_c), Vocabulary::kPad);
  std::vector<uint8_t> mask(static_cast<size_t>(cfg.l_c), 0);
  for (int i = 0; i < n; ++i) {
    padded[i] = token_ids[i];
    mask[i] = 1;
  }

  Tensor x = add(gather_rows(p.tok_emb, padded), p.pos_emb);  // [l_c, d_model]
  x = ctx_dropout(x, ctx);
  for (const auto& layer : p.layers) {
    MhaResult a = apply_mha(layer.self_attn, x, x, mask, /*causal=*/false, ctx);
    x = apply_layer_norm(layer.ln_attn, add(x, a.out));
    Tensor f = apply_feed_forward(layer.ff, x, ctx);
    x = apply_layer_norm(layer.ln_ff, add(x, f));
  }
  EncoderOutput out;
  out.matrix = mask_rows(apply_linear(p.w_c, x), mask);  // [l_c, d_e]
  out.mask = std::move(mask);
  return out;
}

namespace {

void copy_entry(const Archive& a, const std::string& key, Tensor dst) {
  const ArchiveEntry* e = a.find(key);
  if (!e) throw ShapeMismatch("pretrained archive lacks key: " + key);
  if (e->shape != dst.shape())
    throw ShapeMismatch("pretrained archive key '" + key + "' has wrong shape");
  dst.value() = e->values;
}

}  // namespace

void load_pretrained_adapter(CEncoderParams& p, const std::string& weights_path) {
  Archive a = read_archive(weights_path);
  copy_entry(a, "embeddings.word", p.tok_emb);
  copy_entry(a, "embeddings.position", p.pos_emb);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    std::string lp = "layer." + std::to_string(l);
    auto& layer = p.layers[l];
    copy_entry(a, lp + ".attn.wq", layer.self_attn.wq.w);
    copy_entry(a, lp + ".attn.wk", layer.self_attn.wk.w);
    copy_entry(a, lp + ".attn.wv", layer.self_attn.wv.w);
    copy_entry(a, lp + ".attn.wo", layer.self_attn.wo.w);
    copy_entry(a, lp + ".ln_attn.gamma", layer.ln_attn.gamma);
    copy_entry(a, lp + ".ln_attn.beta", layer.ln_attn.beta);
    copy_entry(a, lp + ".ff.w1", layer.ff.w1.w);
    copy_entry(a, lp + ".ff.b1", layer.ff.w1.b);
    copy_entry(a, lp + ".ff.w2", layer.ff.w2.w);
    copy_entry(a, lp + ".ff.b2", layer.ff.w2.b);
    copy_entry(a, lp + ".ln_ff.gamma", layer.ln_ff.gamma);
    copy_entry(a, lp + ".ln_ff.beta", layer.ln_ff.beta);
  }
  // w_c stays locally initialized: the projection is trained in-repo even when
  // the encoder stack arrives pre-trained.
}

}  // namespace gypsum
