#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gypsum/ast.hpp"

namespace gypsum {

// Edge vocabulary of the semantic graph: four base families plus control
// edges, each with a reversed twin, and per-node self-loops (no reverse).
enum class EdgeType : int {
  Child = 0,
  NextSibling = 1,
  NextUse = 2,
  NextToken = 3,
  Control = 4,
  ChildRev = 5,
  NextSiblingRev = 6,
  NextUseRev = 7,
  NextTokenRev = 8,
  ControlRev = 9,
  Self = 10,
};
inline constexpr int kNumEdgeTypes = 11;

const char* to_string(EdgeType t);
EdgeType edge_type_from_string(const std::string& s);  // FormatError on unknown
bool is_forward(EdgeType t);                            // the five base types
EdgeType reversed(EdgeType t);                          // forward type -> *Rev

struct Edge {
  int src = 0;
  int dst = 0;
  EdgeType type = EdgeType::Child;
  bool operator==(const Edge&) const = default;
};

// Semantic graph over an extended AST. Edges form a multiset: parallel edges
// of distinct (or equal) types between the same pair are kept, and each
// contributes its own attention term downstream.
struct SemanticGraph {
  std::string id;
  ExtendedAst ast;
  std::vector<Edge> edges;
};

// Which control-statement wirings to apply; the loop/switch patterns beyond
// if-else are this repo's documented reading of the reference figure, so each
// can be switched off independently.
struct ControlEdgeOptions {
  bool if_else = true;
  bool loop_while = true;   // while and do-while
  bool loop_for = true;     // three-part for
  bool loop_foreach = true; // foreach / iterator for
  bool switch_case = true;
};

// Child / NextSibling / NextToken / NextUse edges from the tree structure.
SemanticGraph add_base_edges(ExtendedAst ast, std::string id = "");

// Control edges per statement pattern (see ControlEdgeOptions).
void add_control_edges(SemanticGraph& g, const ControlEdgeOptions& opt = {});

// One reversed edge per forward edge plus one Self edge per node. Rebuilds
// the reversed/self population from the forward edges, so it is idempotent.
void add_reverse_and_self_edges(SemanticGraph& g);

// Full pipeline: base + control + reversed/self.
SemanticGraph build_graph(ExtendedAst ast, std::string id = "",
                          const ControlEdgeOptions& opt = {});

// Node feed order for the graph encoder: leaves first (source order), then
// internal nodes (pre-order), truncated to l_g; mask marks valid positions.
struct NodeOrdering {
  std::vector<int> selected;     // length min(|V|, l_g)
  std::vector<uint8_t> mask;     // length l_g; 1 = real node, 0 = padding
};
NodeOrdering order_nodes(const SemanticGraph& g, int l_g);

// One JSON object per graph (single line, no trailing newline):
//   {"id", "nodes":[{"id","kind","text","leaf"}], "edges":[{"s","d","t"}]}
// with "t" the EdgeType name. deserialize_graph rebuilds parent/child links
// from the Child edges and throws FormatError on malformed input.
std::string serialize_graph(const SemanticGraph& g);
SemanticGraph deserialize_graph(const std::string& line);

}  // namespace gypsum
