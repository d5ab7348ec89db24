#include "gypsum/decoder.hpp"

#include <numeric>

#include "gypsum/errors.hpp"

namespace gypsum {

DecoderParams make_decoder(ParamStore& ps, const std::string& prefix,
                           const RunConfig& cfg) {
  DecoderParams p;
  p.ff_block = cfg.fusion_ff_block;
  p.tgt_emb = ps.create(prefix + ".tgt_emb", {cfg.vocab_size, cfg.d_e}, Init::FanIn);
  p.pos_emb = ps.create(prefix + ".pos_emb", {cfg.l_s, cfg.d_e}, Init::FanIn);
  p.layers.resize(cfg.L_d);
  for (int l = 0; l < cfg.L_d; ++l) {
    std::string lp = prefix + ".layer." + std::to_string(l);
    auto& layer = p.layers[l];
    layer.self_attn = make_mha(ps, lp + ".self", cfg.d_e, cfg.d_e, cfg.head_d, cfg.d_k,
                               cfg.d_v, cfg.d_e);
    layer.ln_self = make_layer_norm(ps, lp + ".ln_self", cfg.d_e);
    layer.attn_c = make_mha(ps, lp + ".attn_c", cfg.d_e, cfg.d_e, cfg.head_d, cfg.d_k,
                            cfg.d_v, cfg.d_e);
    layer.attn_g = make_mha(ps, lp + ".attn_g", cfg.d_e, cfg.d_e, cfg.head_d, cfg.d_k,
                            cfg.d_v, cfg.d_e);
    layer.w_fuse = make_linear(ps, lp + ".w_fuse", 2 * cfg.d_e, cfg.d_e, /*bias=*/false);
    layer.ln_fuse = make_layer_norm(ps, lp + ".ln_fuse", cfg.d_e);
    if (cfg.fusion_ff_block) {
      layer.ff = make_feed_forward(ps, lp + ".ff", cfg.d_e, cfg.d_ff);
      layer.ln_ff = make_layer_norm(ps, lp + ".ln_ff", cfg.d_e);
    }
  }
  return p;
}

namespace {

// Hybrid fusion applied to the self-attended states x: attention over each
// encoder, concatenation, tanh, projection, residual, norm — then the
// optional feed-forward block. Shared by the batch and single-step paths.
struct FusionResult {
  Tensor states;
  Tensor attn_c;
  Tensor attn_g;
};

FusionResult fuse_and_finish(const DecoderLayerParams& layer, bool ff_block,
                             const Tensor& x, const EncoderOutput& enc_c,
                             const EncoderOutput& enc_g, const ForwardContext& ctx) {
  MhaResult rc = apply_mha(layer.attn_c, x, enc_c.matrix, enc_c.mask,
                           /*causal=*/false, ctx);
  MhaResult rg = apply_mha(layer.attn_g, x, enc_g.matrix, enc_g.mask,
                           /*causal=*/false, ctx);
  Tensor fused = apply_linear(layer.w_fuse, tanh_t(concat_cols(rc.out, rg.out)));
  Tensor out = apply_layer_norm(layer.ln_fuse, add(x, fused));
  if (ff_block) {
    Tensor f = apply_feed_forward(layer.ff, out, ctx);
    out = apply_layer_norm(layer.ln_ff, add(out, f));
  }
  return {out, rc.attn, rg.attn};
}

}  // namespace

DecoderOutput decode_training(const DecoderParams& p, const std::vector<int>& targets,
                              const EncoderOutput& enc_c, const EncoderOutput& enc_g,
                              const RunConfig& cfg, const ForwardContext& ctx) {
  int t = static_cast<int>(targets.size());
  if (t == 0) throw LengthError("decoder needs at least the BOS position");
  if (t > cfg.l_s)
    throw LengthError("target length " + std::to_string(t) + " exceeds l_s=" +
                      std::to_string(cfg.l_s));
  std::vector<int> positions(static_cast<size_t>(t));
  std::iota(positions.begin(), positions.end(), 0);
  Tensor x = add(gather_rows(p.tgt_emb, targets), gather_rows(p.pos_emb, positions));
  x = ctx_dropout(x, ctx);

  std::vector<uint8_t> self_mask(static_cast<size_t>(t), 1);
  DecoderOutput out;
  for (const auto& layer : p.layers) {
    MhaResult sa = apply_mha(layer.self_attn, x, x, self_mask, /*causal=*/true, ctx);
    Tensor d_tilde = apply_layer_norm(layer.ln_self, add(x, sa.out));
    FusionResult fr = fuse_and_finish(layer, p.ff_block, d_tilde, enc_c, enc_g, ctx);
    x = fr.states;
    out.attn_c = fr.attn_c;
    out.attn_g = fr.attn_g;
  }
  out.states = x;
  return out;
}

LayerStepResult decoder_layer_step(const DecoderParams& p, int layer_idx,
                                   const Tensor& d_prev, const Tensor& d_hist,
                                   const EncoderOutput& enc_c,
                                   const EncoderOutput& enc_g, const RunConfig& cfg,
                                   const ForwardContext& ctx) {
  (void)cfg;
  if (layer_idx < 0 || layer_idx >= static_cast<int>(p.layers.size()))
    throw ConfigError("decoder layer index out of range");
  if (d_hist.shape().size() != 2 || d_prev.shape().size() != 1 ||
      d_prev.rows() != d_hist.cols())
    throw ShapeMismatch("decoder step: d_prev/d_hist widths disagree");
  const auto& layer = p.layers[static_cast<size_t>(layer_idx)];

  Tensor q = reshape(d_prev, {1, d_prev.rows()});
  std::vector<uint8_t> hist_mask(static_cast<size_t>(d_hist.rows()), 1);
  MhaResult sa = apply_mha(layer.self_attn, q, d_hist, hist_mask, /*causal=*/false, ctx);
  Tensor d_tilde = apply_layer_norm(layer.ln_self, add(q, sa.out));
  FusionResult fr = fuse_and_finish(layer, p.ff_block, d_tilde, enc_c, enc_g, ctx);
  LayerStepResult r;
  r.d_out = row(fr.states, 0);
  r.attn_c_row = row(fr.attn_c, 0);
  r.attn_g_row = row(fr.attn_g, 0);
  return r;
}

}  // namespace gypsum
