#include "gypsum/nn.hpp"

#include <cmath>

#include "gypsum/errors.hpp"

namespace gypsum {

Tensor ctx_dropout(const Tensor& x, const ForwardContext& ctx) {
  if (!ctx.training || ctx.dropout <= 0.0) return x;
  if (!ctx.rng) throw ConfigError("dropout requested but forward context has no rng");
  return dropout(x, ctx.dropout, *ctx.rng, true);
}

Tensor ParamStore::create(const std::string& name, std::vector<int> shape, Init init) {
  if (map_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor t;
  switch (init) {
    case Init::Zero:
      t = Tensor::zeros(shape, /*requires_grad=*/true);
      break;
    case Init::One:
      t = Tensor::full(shape, 1.0, /*requires_grad=*/true);
      break;
    case Init::FanIn: {
      int fan_in = shape.back();
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      t = Tensor::rand_uniform(shape, bound, rng_, /*requires_grad=*/true);
      break;
    }
  }
  order_.push_back(name);
  map_.emplace(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw ConfigError("unknown parameter name: " + name);
  return it->second;
}

size_t ParamStore::total_values() const {
  size_t n = 0;
  for (const auto& name : order_) n += map_.at(name).size();
  return n;
}

void ParamStore::zero_grad_all() {
  for (const auto& name : order_) map_.at(name).zero_grad();
}

LinearParams make_linear(ParamStore& ps, const std::string& prefix, int in, int out,
                         bool bias) {
  LinearParams p;
  p.w = ps.create(prefix + ".w", {out, in}, Init::FanIn);
  if (bias) p.b = ps.create(prefix + ".b", {out}, Init::Zero);
  return p;
}

Tensor apply_linear(const LinearParams& p, const Tensor& x) {
  return linear(x, p.w, p.b);
}

LayerNormParams make_layer_norm(ParamStore& ps, const std::string& prefix, int d) {
  LayerNormParams p;
  p.gamma = ps.create(prefix + ".gamma", {d}, Init::One);
  p.beta = ps.create(prefix + ".beta", {d}, Init::Zero);
  return p;
}

Tensor apply_layer_norm(const LayerNormParams& p, const Tensor& x) {
  return layer_norm_rows(x, p.gamma, p.beta);
}

FeedForwardParams make_feed_forward(ParamStore& ps, const std::string& prefix,
                                    int d_model, int d_ff) {
  FeedForwardParams p;
  p.w1 = make_linear(ps, prefix + ".ff1", d_model, d_ff, /*bias=*/true);
  p.w2 = make_linear(ps, prefix + ".ff2", d_ff, d_model, /*bias=*/true);
  return p;
}

Tensor apply_feed_forward(const FeedForwardParams& p, const Tensor& x,
                          const ForwardContext& ctx) {
  Tensor h = relu(apply_linear(p.w1, x));
  h = ctx_dropout(h, ctx);
  return apply_linear(p.w2, h);
}

MhaParams make_mha(ParamStore& ps, const std::string& prefix, int d_q_in, int d_kv_in,
                   int heads, int d_k, int d_v, int d_out) {
  if (heads < 1 || d_k < 1 || d_v < 1)
    throw ConfigError("attention dims must be positive: " + prefix);
  MhaParams p;
  p.heads = heads;
  p.d_k = d_k;
  p.d_v = d_v;
  p.wq = make_linear(ps, prefix + ".wq", d_q_in, heads * d_k, /*bias=*/false);
  p.wk = make_linear(ps, prefix + ".wk", d_kv_in, heads * d_k, /*bias=*/false);
  p.wv = make_linear(ps, prefix + ".wv", d_kv_in, heads * d_v, /*bias=*/false);
  p.wo = make_linear(ps, prefix + ".wo", heads * d_v, d_out, /*bias=*/false);
  return p;
}

MhaResult apply_mha(const MhaParams& p, const Tensor& q_in, const Tensor& kv_in,
                    const std::vector<uint8_t>& key_mask, bool causal,
                    const ForwardContext& ctx) {
  if (q_in.shape().size() != 2 || kv_in.shape().size() != 2)
    throw ShapeMismatch("attention expects rank-2 query and key/value inputs");
  int t_k = kv_in.rows();
  std::vector<uint8_t> mask = key_mask;
  if (mask.empty()) mask.assign(static_cast<size_t>(t_k), 1);
  if (static_cast<int>(mask.size()) != t_k)
    throw ShapeMismatch("attention key mask length mismatch");

  Tensor q_all = apply_linear(p.wq, q_in);   // [t_q, heads*d_k]
  Tensor k_all = apply_linear(p.wk, kv_in);  // [t_k, heads*d_k]
  Tensor v_all = apply_linear(p.wv, kv_in);  // [t_k, heads*d_v]

  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_k));
  std::vector<Tensor> head_outs;
  std::vector<Tensor> head_attns;
  head_outs.reserve(p.heads);
  head_attns.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Tensor qh = slice_cols(q_all, h * p.d_k, p.d_k);
    Tensor kh = slice_cols(k_all, h * p.d_k, p.d_k);
    Tensor vh = slice_cols(v_all, h * p.d_v, p.d_v);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dk);  // [t_q, t_k]
    Tensor attn = softmax_rows_masked(scores, mask, causal);
    head_attns.push_back(attn);
    head_outs.push_back(matmul(attn, vh));  // [t_q, d_v]
  }
  Tensor cat = head_outs[0];
  for (int h = 1; h < p.heads; ++h) cat = concat_cols(cat, head_outs[h]);
  MhaResult r;
  r.out = apply_linear(p.wo, cat);
  r.attn = p.heads == 1 ? head_attns[0] : mean_of(head_attns);
  (void)ctx;
  return r;
}

}  // namespace gypsum
