#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gypsum/rng.hpp"
#include "gypsum/tensor.hpp"

namespace gypsum {

// Per-forward-pass settings threaded through every module. `rng` is only
// consulted when training and dropout > 0.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
};

// Applies dropout per the context; identity when not training or rate is 0.
Tensor ctx_dropout(const Tensor& x, const ForwardContext& ctx);

enum class Init {
  Zero,
  One,
  FanIn,  // uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in = last dim
};

// Ordered registry of trainable parameters. Creation order is stable and is
// the canonical order for checkpoint serialization and optimizer state.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : rng_(seed) {}

  // Creates a parameter; throws ConfigError on duplicate names.
  Tensor create(const std::string& name, std::vector<int> shape, Init init);
  bool has(const std::string& name) const { return map_.count(name) > 0; }
  Tensor get(const std::string& name) const;  // throws MissingFile-style ConfigError
  const std::vector<std::string>& names() const { return order_; }
  size_t count() const { return order_.size(); }
  size_t total_values() const;
  void zero_grad_all();
  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

// ---- linear projection ----
struct LinearParams {
  Tensor w;  // [out, in]
  Tensor b;  // [out], undefined when the layer has no bias
};
LinearParams make_linear(ParamStore& ps, const std::string& prefix, int in, int out,
                         bool bias);
// x [t,in] -> [t,out] (rank-1 in -> rank-1 out).
Tensor apply_linear(const LinearParams& p, const Tensor& x);

// ---- layer normalization ----
struct LayerNormParams {
  Tensor gamma;  // [d]
  Tensor beta;   // [d]
};
LayerNormParams make_layer_norm(ParamStore& ps, const std::string& prefix, int d);
Tensor apply_layer_norm(const LayerNormParams& p, const Tensor& x);

// ---- position-wise feed-forward: w2(dropout(relu(w1 x))) ----
struct FeedForwardParams {
  LinearParams w1;  // [d_ff, d_model]
  LinearParams w2;  // [d_model, d_ff]
};
FeedForwardParams make_feed_forward(ParamStore& ps, const std::string& prefix,
                                    int d_model, int d_ff);
Tensor apply_feed_forward(const FeedForwardParams& p, const Tensor& x,
                          const ForwardContext& ctx);

// ---- multi-head scaled-dot-product attention ----
struct MhaParams {
  LinearParams wq;  // [heads*d_k, d_q_in]
  LinearParams wk;  // [heads*d_k, d_kv_in]
  LinearParams wv;  // [heads*d_v, d_kv_in]
  LinearParams wo;  // [d_out, heads*d_v]
  int heads = 0;
  int d_k = 0;
  int d_v = 0;
};
MhaParams make_mha(ParamStore& ps, const std::string& prefix, int d_q_in, int d_kv_in,
                   int heads, int d_k, int d_v, int d_out);

struct MhaResult {
  Tensor out;   // [t_q, d_out]
  Tensor attn;  // head-averaged probabilities [t_q, t_k]; rows sum to 1 over
                // unmasked keys, masked keys are exactly 0
};
// key_mask marks valid key positions (empty -> all valid). causal restricts
// query i to keys j <= i (requires t_q == t_k alignment by position).
MhaResult apply_mha(const MhaParams& p, const Tensor& q_in, const Tensor& kv_in,
                    const std::vector<uint8_t>& key_mask, bool causal,
                    const ForwardContext& ctx);

}  // namespace gypsum
