#include "gypsum/graph.hpp"

#include <algorithm>
#include <unordered_map>

#include "gypsum/errors.hpp"
#include "json.hpp"

namespace gypsum {

namespace {

const char* kEdgeNames[kNumEdgeTypes] = {
    "Child",    "NextSibling",    "NextUse",    "NextToken",    "Control",
    "ChildRev", "NextSiblingRev", "NextUseRev", "NextTokenRev", "ControlRev",
    "Self"};

}  // namespace

const char* to_string(EdgeType t) { return kEdgeNames[static_cast<int>(t)]; }

EdgeType edge_type_from_string(const std::string& s) {
  for (int i = 0; i < kNumEdgeTypes; ++i)
    if (s == kEdgeNames[i]) return static_cast<EdgeType>(i);
  throw FormatError("unknown edge type: " + s);
}

bool is_forward(EdgeType t) { return static_cast<int>(t) < 5; }

EdgeType reversed(EdgeType t) {
  if (!is_forward(t)) throw DataError("edge type has no reversed twin");
  return static_cast<EdgeType>(static_cast<int>(t) + 5);
}

SemanticGraph add_base_edges(ExtendedAst ast, std::string id) {
  SemanticGraph g;
  g.id = std::move(id);
  g.ast = std::move(ast);
  const auto& nodes = g.ast.nodes;

  // Child and NextSibling straight from the tree.
  for (const auto& n : nodes) {
    for (size_t k = 0; k < n.children.size(); ++k) {
      g.edges.push_back({n.id, n.children[k], EdgeType::Child});
      if (k + 1 < n.children.size())
        g.edges.push_back({n.children[k], n.children[k + 1], EdgeType::NextSibling});
    }
  }

  // NextToken chains the leaves in source order.
  std::vector<int> leaves = g.ast.leaves_in_order();
  for (size_t k = 0; k + 1 < leaves.size(); ++k)
    g.edges.push_back({leaves[k], leaves[k + 1], EdgeType::NextToken});

  // NextUse chains consecutive same-text variable nodes in depth-first
  // order. A variable node is an identifier-flagged leaf or an
  // identifier-flagged split group (matched on its pre-split text).
  std::unordered_map<std::string, int> last_use;
  for (int idx : g.ast.preorder()) {
    const AstNode& n = nodes[static_cast<size_t>(idx)];
    bool variable = n.identifier && (n.leaf || n.kind == "_SplitNode_");
    if (!variable) continue;
    auto it = last_use.find(n.text);
    if (it != last_use.end()) {
      g.edges.push_back({it->second, n.id, EdgeType::NextUse});
      it->second = n.id;
    } else {
      last_use.emplace(n.text, n.id);
    }
  }
  return g;
}

namespace {

int next_sibling_of(const ExtendedAst& ast, int id) {
  int parent = ast.node(id).parent;
  if (parent < 0) return -1;
  const auto& ch = ast.node(parent).children;
  auto it = std::find(ch.begin(), ch.end(), id);
  if (it == ch.end() || it + 1 == ch.end()) return -1;
  return *(it + 1);
}

bool is_block_like(const std::string& kind) {
  return kind == "BlockStatement" || kind == "body" || kind == "orelse" ||
         kind == "finalbody";
}

// Where control leaves a branch: the branch's last statement when the branch
// is a block (the block itself when empty), otherwise the branch node.
int last_statement_of(const ExtendedAst& ast, int id) {
  const AstNode& n = ast.node(id);
  if (is_block_like(n.kind) && !n.children.empty()) return n.children.back();
  return id;
}

struct ControlBuilder {
  SemanticGraph& g;
  const ControlEdgeOptions& opt;

  void edge(int s, int d) {
    if (s >= 0 && d >= 0) g.edges.push_back({s, d, EdgeType::Control});
  }

  void visit(int id) {
    const AstNode& n = g.ast.node(id);
    const auto& ch = n.children;
    if (opt.if_else && (n.kind == "IfStatement" || n.kind == "If")) {
      // condition -> then branch, condition -> else branch,
      // then branch -> next sibling of the statement.
      if (ch.size() >= 2) {
        edge(ch[0], ch[1]);
        if (ch.size() >= 3) edge(ch[0], ch[2]);
        edge(ch[1], next_sibling_of(g.ast, id));
      }
    } else if (opt.loop_while && (n.kind == "WhileStatement" || n.kind == "While")) {
      if (ch.size() >= 2) {
        edge(ch[0], ch[1]);
        edge(last_statement_of(g.ast, ch[1]), ch[0]);
        edge(ch[0], next_sibling_of(g.ast, id));
      }
    } else if (opt.loop_while && n.kind == "DoStatement") {
      // same wiring as while, with the child order swapped
      if (ch.size() >= 2) {
        edge(ch[1], ch[0]);
        edge(last_statement_of(g.ast, ch[0]), ch[1]);
        edge(ch[1], next_sibling_of(g.ast, id));
      }
    } else if (opt.loop_for && n.kind == "ForStatement") {
      if (ch.empty()) return;
      int body = ch.back();
      int init = -1, cond = -1, update = -1;
      for (size_t k = 0; k + 1 < ch.size(); ++k) {
        const std::string& kind = g.ast.node(ch[k]).kind;
        if (kind == "ForInit")
          init = ch[k];
        else if (kind == "ForUpdate")
          update = ch[k];
        else
          cond = ch[k];
      }
      edge(init, cond);
      edge(cond, body);
      // loop back through update when present, straight to cond otherwise
      int back = update >= 0 ? update : cond;
      edge(last_statement_of(g.ast, body), back);
      if (update >= 0) edge(update, cond);
      if (cond >= 0) edge(cond, next_sibling_of(g.ast, id));
    } else if (opt.loop_foreach && (n.kind == "ForEachStatement" || n.kind == "For")) {
      // iterated expression -> body -> back to the expression
      int iter = -1, body = -1;
      if (n.kind == "ForEachStatement" && ch.size() >= 2) {
        body = ch.back();
        iter = ch[ch.size() - 2];
      } else if (n.kind == "For" && ch.size() >= 3) {
        iter = ch[1];
        body = ch[2];
      }
      if (iter >= 0 && body >= 0) {
        edge(iter, body);
        edge(last_statement_of(g.ast, body), iter);
        edge(iter, next_sibling_of(g.ast, id));
      }
    } else if (opt.switch_case && n.kind == "SwitchStatement") {
      if (ch.size() >= 2) {
        int out = next_sibling_of(g.ast, id);
        for (size_t k = 1; k < ch.size(); ++k) {
          edge(ch[0], ch[k]);
          edge(ch[k], out);
        }
      }
    }
  }
};

}  // namespace

void add_control_edges(SemanticGraph& g, const ControlEdgeOptions& opt) {
  ControlBuilder b{g, opt};
  for (int id : g.ast.preorder()) b.visit(id);
}

void add_reverse_and_self_edges(SemanticGraph& g) {
  // Rebuild the derived population from the forward edges so a second
  // application yields the same multiset.
  std::vector<Edge> forward;
  forward.reserve(g.edges.size());
  for (const Edge& e : g.edges)
    if (is_forward(e.type)) forward.push_back(e);
  g.edges = forward;
  for (const Edge& e : forward) g.edges.push_back({e.dst, e.src, reversed(e.type)});
  for (const auto& n : g.ast.nodes) g.edges.push_back({n.id, n.id, EdgeType::Self});
}

SemanticGraph build_graph(ExtendedAst ast, std::string id,
                          const ControlEdgeOptions& opt) {
  SemanticGraph g = add_base_edges(std::move(ast), std::move(id));
  add_control_edges(g, opt);
  add_reverse_and_self_edges(g);
  return g;
}

NodeOrdering order_nodes(const SemanticGraph& g, int l_g) {
  if (l_g < 1) throw DataError("node ordering length must be at least 1");
  NodeOrdering o;
  std::vector<int> internals;
  for (int id : g.ast.preorder()) {
    if (g.ast.node(id).leaf)
      o.selected.push_back(id);
    else
      internals.push_back(id);
  }
  o.selected.insert(o.selected.end(), internals.begin(), internals.end());
  if (static_cast<int>(o.selected.size()) > l_g) o.selected.resize(static_cast<size_t>(l_g));
  o.mask.assign(static_cast<size_t>(l_g), 0);
  for (size_t i = 0; i < o.selected.size(); ++i) o.mask[i] = 1;
  return o;
}

std::string serialize_graph(const SemanticGraph& g) {
  nlohmann::json j;
  j["id"] = g.id;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& n : g.ast.nodes) {
    nodes.push_back({{"id", n.id}, {"kind", n.kind}, {"text", n.text}, {"leaf", n.leaf}});
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const Edge& e : g.edges) {
    edges.push_back({{"s", e.src}, {"d", e.dst}, {"t", to_string(e.type)}});
  }
  return j.dump();
}

SemanticGraph deserialize_graph(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad graph line: ") + e.what());
  }
  SemanticGraph g;
  try {
    g.id = j.at("id").get<std::string>();
    const auto& nodes = j.at("nodes");
    if (!nodes.is_array() || nodes.empty())
      throw FormatError("graph must have at least one node");
    g.ast.nodes.resize(nodes.size());
    for (const auto& nj : nodes) {
      int id = nj.at("id").get<int>();
      if (id < 0 || id >= static_cast<int>(nodes.size()))
        throw FormatError("node id out of range");
      AstNode& n = g.ast.nodes[static_cast<size_t>(id)];
      n.id = id;
      n.kind = nj.at("kind").get<std::string>();
      n.text = nj.at("text").get<std::string>();
      n.leaf = nj.at("leaf").get<bool>();
    }
    for (const auto& ej : j.at("edges")) {
      Edge e;
      e.src = ej.at("s").get<int>();
      e.dst = ej.at("d").get<int>();
      e.type = edge_type_from_string(ej.at("t").get<std::string>());
      if (e.src < 0 || e.src >= g.ast.size() || e.dst < 0 || e.dst >= g.ast.size())
        throw FormatError("edge endpoint out of range");
      g.edges.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad graph line: ") + e.what());
  }

  // Rebuild the tree from the Child edges; sibling order is ascending id
  // because serialized node ids are canonical pre-order.
  for (const Edge& e : g.edges) {
    if (e.type != EdgeType::Child) continue;
    g.ast.nodes[static_cast<size_t>(e.src)].children.push_back(e.dst);
    g.ast.nodes[static_cast<size_t>(e.dst)].parent = e.src;
  }
  int root = -1;
  for (auto& n : g.ast.nodes) {
    std::sort(n.children.begin(), n.children.end());
    if (std::adjacent_find(n.children.begin(), n.children.end()) != n.children.end())
      throw FormatError("duplicate child edge");
    if (n.parent < 0) {
      if (root >= 0) throw FormatError("graph has multiple roots");
      root = n.id;
    }
  }
  if (root < 0) throw FormatError("graph has no root");
  g.ast.root = root;
  try {
    g.ast.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("bad graph tree: ") + e.what());
  }
  return g;
}

}  // namespace gypsum
