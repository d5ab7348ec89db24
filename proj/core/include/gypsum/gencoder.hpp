#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gypsum/cencoder.hpp"  // EncoderOutput
#include "gypsum/config.hpp"
#include "gypsum/graph.hpp"
#include "gypsum/nn.hpp"
#include "gypsum/tensor.hpp"
#include "gypsum/vocab.hpp"

namespace gypsum {

// Node-kind registry backing the learned type-embedding table. The kind set
// is fixed when parameters are created (scanned from the training corpus);
// unseen kinds at inference raise UnknownKind.
class KindRegistry {
 public:
  KindRegistry() = default;
  explicit KindRegistry(std::vector<std::string> kinds);

  int index(const std::string& kind) const;  // throws UnknownKind
  bool contains(const std::string& kind) const { return map_.count(kind) > 0; }
  int size() const { return static_cast<int>(kinds_.size()); }
  const std::vector<std::string>& kinds() const { return kinds_; }

 private:
  std::vector<std::string> kinds_;
  std::unordered_map<std::string, int> map_;
};

// Collects every node kind in the graph into the registry under construction.
void collect_kinds(const SemanticGraph& g, std::vector<std::string>& kinds,
                   std::unordered_map<std::string, int>& seen);

// Graph-attention encoder. Scoring for the edge (j -> i, type t) at layer l,
// head k is LeakyReLU(w_score^(l,k) . [W h_i ; W h_j ; W_e e_t]) with W and
// W_e shared across layers and heads and w_score per layer and head.
// Attention normalizes over each node's full incident-edge multiset (Self
// and parallel edges each scored separately). Aggregation applies ELU inside
// the sum over incident edges (literal form), or outside when
// `gat_activation_outside` is set. Hidden layers concatenate head outputs and
// project back to h_g; the last layer averages heads.
struct GatHeadParams {
  Tensor w_score;  // [2*h_g + d_edge]
};
struct GatLayerParams {
  std::vector<GatHeadParams> heads;
  LinearParams w_o;  // hidden layers only: [h_g, heads*h_g]
};
struct GEncoderParams {
  Tensor tok_emb;         // shared token table [vocab, d_model], caller-owned
  Tensor type_emb;        // [n_kinds, d_t]
  LinearParams init_proj; // [h_g, d_model + d_t]
  Tensor w;               // [h_g, h_g]
  Tensor w_e;             // [d_edge, d_edge]
  Tensor edge_emb;        // [kNumEdgeTypes, d_edge]
  std::vector<GatLayerParams> layers;
  LinearParams out_proj;  // only when h_g != d_e: [d_e, h_g]
};

GEncoderParams make_gencoder(ParamStore& ps, const std::string& prefix,
                             const RunConfig& cfg, Tensor shared_tok_emb,
                             int n_kinds);

// Incident-edge layout for attention: edges sorted by (dst, src, type), with
// contiguous per-destination segments. Requires every node to have at least
// one incident edge (guaranteed once Self edges are added); DataError if not.
struct EdgeBatch {
  std::vector<int> src, dst, type;  // parallel arrays, one entry per edge
  std::vector<int> seg_offsets;     // n_nodes + 1 segment boundaries
};
EdgeBatch build_edge_batch(const SemanticGraph& g);

// Initial node states: e_i = init_proj([text-embedding ; type-embedding]).
// Leaves look their text up in the shared vocabulary (UNK when absent);
// internal nodes use a zero text vector. Throws UnknownKind for kinds
// missing from the registry.
Tensor init_node_states(const GEncoderParams& p, const SemanticGraph& g,
                        const Vocabulary& vocab, const KindRegistry& kinds);

struct GatLayerResult {
  Tensor states;     // [n_nodes, h_g]
  Tensor edge_attn;  // [n_edges] head-averaged attention, aligned with EdgeBatch
};
GatLayerResult gat_layer(const GEncoderParams& p, int layer_idx, const Tensor& states,
                         const EdgeBatch& batch, const RunConfig& cfg);

// Full encoding: L_g attention layers, structural node ordering (leaves then
// internals, preorder), optional width projection, padding to l_g rows.
// edge_attn holds the last layer's head-averaged edge attention for
// input-attribution export. Throws LengthError when |V| exceeds node_cap.
struct GraphEncoding {
  EncoderOutput out;      // matrix [l_g, d_e], mask length l_g
  Tensor edge_attn;       // [n_edges], aligned with `batch`
  EdgeBatch batch;
  NodeOrdering ordering;  // selected node ids per output row
};
GraphEncoding encode_graph(const GEncoderParams& p, const SemanticGraph& g,
                           const Vocabulary& vocab, const KindRegistry& kinds,
                           const RunConfig& cfg, const ForwardContext& ctx);

}  // namespace gypsum
