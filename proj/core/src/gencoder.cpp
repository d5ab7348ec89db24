#include "gypsum/gencoder.hpp"

#include <algorithm>

#include "gypsum/errors.hpp"

namespace gypsum {

namespace {
constexpr double kLeakySlope = 0.2;
}

KindRegistry::KindRegistry(std::vector<std::string> kinds) : kinds_(std::move(kinds)) {
  for (size_t i = 0; i < kinds_.size(); ++i) {
    if (!map_.emplace(kinds_[i], static_cast<int>(i)).second)
      throw DataError("duplicate node kind in registry: " + kinds_[i]);
  }
}

int KindRegistry::index(const std::string& kind) const {
  auto it = map_.find(kind);
  if (it == map_.end()) throw UnknownKind("node kind has no type embedding: " + kind);
  return it->second;
}

void collect_kinds(const SemanticGraph& g, std::vector<std::string>& kinds,
                   std::unordered_map<std::string, int>& seen) {
  for (const auto& n : g.ast.nodes) {
    if (seen.emplace(n.kind, 1).second) kinds.push_back(n.kind);
  }
}

GEncoderParams make_gencoder(ParamStore& ps, const std::string& prefix,
                             const RunConfig& cfg, Tensor shared_tok_emb,
                             int n_kinds) {
  if (!shared_tok_emb.defined() || shared_tok_emb.cols() != cfg.d_model)
    throw ShapeMismatch("token embedding width must equal d_model");
  if (n_kinds < 1) throw ConfigError("graph encoder needs at least one node kind");
  GEncoderParams p;
  p.tok_emb = shared_tok_emb;
  p.type_emb = ps.create(prefix + ".type_emb", {n_kinds, cfg.d_t}, Init::FanIn);
  p.init_proj = make_linear(ps, prefix + ".init_proj", cfg.d_model + cfg.d_t, cfg.h_g,
                            /*bias=*/true);
  p.w = ps.create(prefix + ".w", {cfg.h_g, cfg.h_g}, Init::FanIn);
  p.w_e = ps.create(prefix + ".w_e", {cfg.d_edge, cfg.d_edge}, Init::FanIn);
  p.edge_emb = ps.create(prefix + ".edge_emb", {kNumEdgeTypes, cfg.d_edge}, Init::FanIn);
  p.layers.resize(cfg.L_g);
  for (int l = 0; l < cfg.L_g; ++l) {
    auto& layer = p.layers[l];
    layer.heads.resize(cfg.head_g);
    for (int h = 0; h < cfg.head_g; ++h) {
      layer.heads[h].w_score =
          ps.create(prefix + ".layer." + std::to_string(l) + ".head." +
                        std::to_string(h) + ".w_score",
                    {2 * cfg.h_g + cfg.d_edge}, Init::FanIn);
    }
    bool last = l == cfg.L_g - 1;
    if (!last)
      layer.w_o = make_linear(ps, prefix + ".layer." + std::to_string(l) + ".w_o",
                              cfg.head_g * cfg.h_g, cfg.h_g, /*bias=*/false);
  }
  if (cfg.h_g != cfg.d_e)
    p.out_proj = make_linear(ps, prefix + ".out_proj", cfg.h_g, cfg.d_e, /*bias=*/false);
  return p;
}

EdgeBatch build_edge_batch(const SemanticGraph& g) {
  int n = static_cast<int>(g.ast.nodes.size());
  std::vector<Edge> edges = g.edges;
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.dst != b.dst) return a.dst < b.dst;
    if (a.src != b.src) return a.src < b.src;
    return static_cast<int>(a.type) < static_cast<int>(b.type);
  });
  EdgeBatch batch;
  batch.src.reserve(edges.size());
  batch.dst.reserve(edges.size());
  batch.type.reserve(edges.size());
  for (const auto& e : edges) {
    batch.src.push_back(e.src);
    batch.dst.push_back(e.dst);
    batch.type.push_back(static_cast<int>(e.type));
  }
  batch.seg_offsets.assign(static_cast<size_t>(n) + 1, 0);
  for (const auto& e : edges) ++batch.seg_offsets[static_cast<size_t>(e.dst) + 1];
  for (int i = 0; i < n; ++i)
    batch.seg_offsets[static_cast<size_t>(i) + 1] +=
        batch.seg_offsets[static_cast<size_t>(i)];
  for (int i = 0; i < n; ++i) {
    if (batch.seg_offsets[static_cast<size_t>(i)] ==
        batch.seg_offsets[static_cast<size_t>(i) + 1])
      throw DataError("node " + std::to_string(i) +
                      " has no incident edge; finalize the graph with self edges");
  }
  return batch;
}

Tensor init_node_states(const GEncoderParams& p, const SemanticGraph& g,
                        const Vocabulary& vocab, const KindRegistry& kinds) {
  int n = static_cast<int>(g.ast.nodes.size());
  std::vector<int> text_ids(static_cast<size_t>(n), Vocabulary::kPad);
  std::vector<uint8_t> leaf_mask(static_cast<size_t>(n), 0);
  std::vector<int> kind_ids(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const auto& node = g.ast.nodes[static_cast<size_t>(i)];
    kind_ids[static_cast<size_t>(i)] = kinds.index(node.kind);
    if (node.leaf) {
      text_ids[static_cast<size_t>(i)] = vocab.id(node.text);
      leaf_mask[static_cast<size_t>(i)] = 1;
    }
  }
  // Internal nodes carry a zero text vector; masking after the gather keeps
  // the lookup differentiable for leaves only.
  Tensor text = mask_rows(gather_rows(p.tok_emb, text_ids), leaf_mask);
  Tensor type = gather_rows(p.type_emb, kind_ids);
  return apply_linear(p.init_proj, concat_cols(text, type));  // [n, h_g]
}

GatLayerResult gat_layer(const GEncoderParams& p, int layer_idx, const Tensor& states,
                         const EdgeBatch& batch, const RunConfig& cfg) {
  if (layer_idx < 0 || layer_idx >= static_cast<int>(p.layers.size()))
    throw ConfigError("gat_layer: layer index out of range");
  const auto& layer = p.layers[static_cast<size_t>(layer_idx)];
  bool last = layer_idx == static_cast<int>(p.layers.size()) - 1;
  int h_g = states.cols();
  int n_edges = static_cast<int>(batch.src.size());
  int n_nodes = states.rows();

  Tensor wh = matmul(states, transpose(p.w));        // [n, h_g] rows = W h_i
  Tensor wee = matmul(p.edge_emb, transpose(p.w_e)); // [types, d_edge]

  std::vector<Tensor> head_states;
  std::vector<Tensor> head_attn;
  head_states.reserve(layer.heads.size());
  head_attn.reserve(layer.heads.size());
  for (const auto& head : layer.heads) {
    Tensor wrow = reshape(head.w_score, {1, 2 * h_g + cfg.d_edge});
    Tensor w1 = slice_cols(wrow, 0, h_g);                  // pairs with W h_dst
    Tensor w2 = slice_cols(wrow, h_g, h_g);                // pairs with W h_src
    Tensor w3 = slice_cols(wrow, 2 * h_g, cfg.d_edge);     // pairs with W_e e_t
    Tensor alpha = matmul(wh, transpose(w1));              // [n, 1]
    Tensor beta = matmul(wh, transpose(w2));               // [n, 1]
    Tensor gamma = matmul(wee, transpose(w3));             // [types, 1]
    Tensor scores = add(add(gather_rows(alpha, batch.dst), gather_rows(beta, batch.src)),
                        gather_rows(gamma, batch.type));   // [E, 1]
    scores = leaky_relu(reshape(scores, {n_edges}), kLeakySlope);
    Tensor attn = segment_softmax(scores, batch.seg_offsets);  // [E]
    head_attn.push_back(attn);

    Tensor neigh = gather_rows(states, batch.src);  // raw h_src rows, [E, h_g]
    Tensor scaled = scale_rows(neigh, attn);
    Tensor agg;
    if (cfg.gat_activation_outside) {
      agg = elu(segment_sum_rows(scaled, batch.dst, n_nodes));
    } else {
      agg = segment_sum_rows(elu(scaled), batch.dst, n_nodes);
    }
    head_states.push_back(agg);  // [n, h_g]
  }

  GatLayerResult r;
  r.edge_attn = head_attn.size() == 1 ? head_attn[0] : mean_of(head_attn);
  if (last) {
    r.states = head_states.size() == 1 ? head_states[0] : mean_of(head_states);
  } else {
    Tensor cat = head_states[0];
    for (size_t h = 1; h < head_states.size(); ++h)
      cat = concat_cols(cat, head_states[h]);
    r.states = apply_linear(layer.w_o, cat);
  }
  return r;
}

GraphEncoding encode_graph(const GEncoderParams& p, const SemanticGraph& g,
                           const Vocabulary& vocab, const KindRegistry& kinds,
                           const RunConfig& cfg, const ForwardContext& ctx) {
  (void)ctx;  // attention layers are dropout-free; kept for interface symmetry
  int n = static_cast<int>(g.ast.nodes.size());
  if (n > cfg.node_cap)
    throw LengthError("graph has " + std::to_string(n) + " nodes, above node cap " +
                      std::to_string(cfg.node_cap));
  GraphEncoding enc;
  enc.batch = build_edge_batch(g);
  Tensor h = init_node_states(p, g, vocab, kinds);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    GatLayerResult r = gat_layer(p, static_cast<int>(l), h, enc.batch, cfg);
    h = r.states;
    enc.edge_attn = r.edge_attn;
  }
  enc.ordering = order_nodes(g, cfg.l_g);
  std::vector<int> idx = enc.ordering.selected;
  idx.resize(static_cast<size_t>(cfg.l_g), 0);  // pad rows; masked to zero below
  Tensor sel = gather_rows(h, idx);             // [l_g, h_g]
  if (p.out_proj.w.defined()) sel = apply_linear(p.out_proj, sel);
  enc.out.matrix = mask_rows(sel, enc.ordering.mask);  // [l_g, d_e]
  enc.out.mask = enc.ordering.mask;
  return enc;
}

}  // namespace gypsum
