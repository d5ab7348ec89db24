// Semantic-graph construction: base edge families, control-statement wiring,
// reversed/self edges, node ordering, and JSON-line serialization.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "gypsum/errors.hpp"
#include "gypsum/frontend.hpp"
#include "gypsum/graph.hpp"
#include "gypsum/tokenizer.hpp"

using namespace gypsum;

namespace {

ExtendedAst extended(const std::string& code, Language lang) {
  HeuristicTokenizer tk;
  ExtendedAst ast = lang == Language::Java ? parse_java(code) : parse_python(code);
  return extend_ast(std::move(ast), tk, lang);
}

std::vector<Edge> edges_of_type(const SemanticGraph& g, EdgeType t) {
  std::vector<Edge> out;
  for (const Edge& e : g.edges)
    if (e.type == t) out.push_back(e);
  return out;
}

size_t count_type(const SemanticGraph& g, EdgeType t) {
  return edges_of_type(g, t).size();
}

bool has_edge(const SemanticGraph& g, int s, int d, EdgeType t) {
  return std::find(g.edges.begin(), g.edges.end(), Edge{s, d, t}) != g.edges.end();
}

int find_node(const ExtendedAst& ast, const std::string& kind, const std::string& text,
              int skip = 0) {
  for (int id : ast.preorder()) {
    if (ast.node(id).kind == kind && (text.empty() || ast.node(id).text == text)) {
      if (skip-- == 0) return id;
    }
  }
  return -1;
}

std::vector<Edge> sorted_edges(std::vector<Edge> es) {
  std::sort(es.begin(), es.end(), [](const Edge& a, const Edge& b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return static_cast<int>(a.type) < static_cast<int>(b.type);
  });
  return es;
}

// Small hand-built tree: parent P with leaf children A, B, C.
ExtendedAst sibling_tree() {
  ExtendedAst ast;
  ast.nodes.resize(4);
  ast.nodes[0] = {0, "P", "", false, -1, {1, 2, 3}, false};
  ast.nodes[1] = {1, "L", "a", true, 0, {}, false};
  ast.nodes[2] = {2, "L", "b", true, 0, {}, false};
  ast.nodes[3] = {3, "L", "c", true, 0, {}, false};
  ast.root = 0;
  ast.validate();
  return ast;
}

}  // namespace

TEST_CASE("base edges: siblings, tokens, children") {
  SemanticGraph g = add_base_edges(sibling_tree(), "t");
  CHECK(count_type(g, EdgeType::Child) == 3);
  CHECK(has_edge(g, 1, 2, EdgeType::NextSibling));
  CHECK(has_edge(g, 2, 3, EdgeType::NextSibling));
  CHECK(count_type(g, EdgeType::NextSibling) == 2);
  CHECK(has_edge(g, 1, 2, EdgeType::NextToken));
  CHECK(has_edge(g, 2, 3, EdgeType::NextToken));
  CHECK(count_type(g, EdgeType::NextToken) == 2);
  CHECK(count_type(g, EdgeType::NextUse) == 0);
}

TEST_CASE("base edges: single leaf under root") {
  ExtendedAst ast;
  ast.nodes.resize(2);
  ast.nodes[0] = {0, "P", "", false, -1, {1}, false};
  ast.nodes[1] = {1, "L", "x", true, 0, {}, false};
  ast.root = 0;
  SemanticGraph g = add_base_edges(std::move(ast), "t");
  CHECK(count_type(g, EdgeType::Child) == 1);
  CHECK(count_type(g, EdgeType::NextSibling) == 0);
  CHECK(count_type(g, EdgeType::NextToken) == 0);
  CHECK(count_type(g, EdgeType::NextUse) == 0);
}

TEST_CASE("use chain over repeated variable") {
  SemanticGraph g = add_base_edges(extended("x = 1; y = x + x;", Language::Java));
  std::vector<int> xs;
  for (int id : g.ast.preorder())
    if (g.ast.node(id).leaf && g.ast.node(id).text == "x") xs.push_back(id);
  REQUIRE(xs.size() == 3);
  auto use = edges_of_type(g, EdgeType::NextUse);
  REQUIRE(use.size() == 2);
  CHECK(has_edge(g, xs[0], xs[1], EdgeType::NextUse));
  CHECK(has_edge(g, xs[1], xs[2], EdgeType::NextUse));
}

TEST_CASE("use chain matches split identifiers on pre-split text") {
  SemanticGraph g = add_base_edges(
      extended("void f() { int rowCount = 1; use(rowCount); }", Language::Java));
  std::vector<int> groups;
  for (int id : g.ast.preorder())
    if (g.ast.node(id).kind == "_SplitNode_" && g.ast.node(id).text == "rowCount")
      groups.push_back(id);
  REQUIRE(groups.size() == 2);
  auto use = edges_of_type(g, EdgeType::NextUse);
  REQUIRE(use.size() == 1);
  CHECK(use[0].src == groups[0]);
  CHECK(use[0].dst == groups[1]);
}

TEST_CASE("use chains never mix different texts") {
  SemanticGraph g =
      add_base_edges(extended("a = b; c = a; b = c;", Language::Java));
  for (const Edge& e : edges_of_type(g, EdgeType::NextUse)) {
    CHECK(g.ast.node(e.src).text == g.ast.node(e.dst).text);
  }
}

TEST_CASE("child count is node count minus one; tokens form a leaf path") {
  for (const char* code : {"void f(int a) { return; }",
                           "int g() { int x = 1; while (x < 9) { x++; } return x; }"}) {
    SemanticGraph g = add_base_edges(extended(code, Language::Java));
    CHECK(count_type(g, EdgeType::Child) == static_cast<size_t>(g.ast.size() - 1));
    auto leaves = g.ast.leaves_in_order();
    auto toks = edges_of_type(g, EdgeType::NextToken);
    REQUIRE(toks.size() == leaves.size() - 1);
    for (size_t i = 0; i + 1 < leaves.size(); ++i) {
      CHECK(toks[i].src == leaves[i]);
      CHECK(toks[i].dst == leaves[i + 1]);
    }
  }
}

TEST_CASE("if-else control wiring matches the documented pattern") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int a, int b, int c) {\n"
      "  if (a < b) x = 1; else if (c > 0) y = 2;\n"
      "  z = 3;\n"
      "}",
      Language::Java));
  add_control_edges(g);

  int cond = find_node(g.ast, "BinaryOperation", "");        // a < b
  int then_stmt = find_node(g.ast, "StatementExpression", ""); // x = 1
  int inner_if = find_node(g.ast, "IfStatement", "", 1);
  int next_stmt = -1;  // z = 3 is the last StatementExpression under the method
  for (int id : g.ast.preorder())
    if (g.ast.node(id).kind == "StatementExpression") next_stmt = id;
  REQUIRE(cond >= 0);
  REQUIRE(then_stmt >= 0);
  REQUIRE(inner_if >= 0);
  REQUIRE(next_stmt >= 0);

  CHECK(has_edge(g, cond, then_stmt, EdgeType::Control));
  CHECK(has_edge(g, cond, inner_if, EdgeType::Control));
  CHECK(has_edge(g, then_stmt, next_stmt, EdgeType::Control));
  // inner if: its condition wires to its own then-branch; the inner then has
  // no next sibling, so there is exactly one more control edge.
  CHECK(count_type(g, EdgeType::Control) == 4);
}

TEST_CASE("while control wiring: cond->body, last->cond, cond->exit") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int c) { while (c > 0) { s(); } t(); }", Language::Java));
  add_control_edges(g);
  int cond = find_node(g.ast, "BinaryOperation", "");
  int body = find_node(g.ast, "BlockStatement", "");
  int s_stmt = find_node(g.ast, "StatementExpression", "");
  int t_stmt = -1;
  for (int id : g.ast.preorder())
    if (g.ast.node(id).kind == "StatementExpression") t_stmt = id;
  REQUIRE(cond >= 0);
  CHECK(has_edge(g, cond, body, EdgeType::Control));
  CHECK(has_edge(g, s_stmt, cond, EdgeType::Control));
  CHECK(has_edge(g, cond, t_stmt, EdgeType::Control));
  CHECK(count_type(g, EdgeType::Control) == 3);
}

TEST_CASE("empty loop body loops back from the block itself") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int c) { while (c > 0) {} }", Language::Java));
  add_control_edges(g);
  int cond = find_node(g.ast, "BinaryOperation", "");
  int body = find_node(g.ast, "BlockStatement", "");
  CHECK(has_edge(g, cond, body, EdgeType::Control));
  CHECK(has_edge(g, body, cond, EdgeType::Control));
  CHECK(count_type(g, EdgeType::Control) == 2);  // no next sibling, no exit
}

TEST_CASE("for control wiring: init->cond->body, last->update->cond, exit") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int n) {\n"
      "  for (int i = 0; i < n; i++) { s(); }\n"
      "  t();\n"
      "}",
      Language::Java));
  add_control_edges(g);
  int init = find_node(g.ast, "ForInit", "");
  int cond = find_node(g.ast, "BinaryOperation", "");
  int update = find_node(g.ast, "ForUpdate", "");
  int body = -1;
  for (int id : g.ast.preorder())
    if (g.ast.node(id).kind == "BlockStatement" &&
        g.ast.node(g.ast.node(id).parent).kind == "ForStatement")
      body = id;
  int s_stmt = -1, t_stmt = -1;
  for (int id : g.ast.preorder()) {
    if (g.ast.node(id).kind != "StatementExpression") continue;
    if (g.ast.node(g.ast.node(id).parent).kind == "BlockStatement" && s_stmt < 0)
      s_stmt = id;
    if (g.ast.node(g.ast.node(id).parent).kind == "MethodDeclaration") t_stmt = id;
  }
  REQUIRE(init >= 0);
  REQUIRE(update >= 0);
  REQUIRE(body >= 0);
  CHECK(has_edge(g, init, cond, EdgeType::Control));
  CHECK(has_edge(g, cond, body, EdgeType::Control));
  CHECK(has_edge(g, s_stmt, update, EdgeType::Control));
  CHECK(has_edge(g, update, cond, EdgeType::Control));
  CHECK(has_edge(g, cond, t_stmt, EdgeType::Control));
  CHECK(count_type(g, EdgeType::Control) == 5);
}

TEST_CASE("foreach and switch control wiring") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int[] xs, int n) {\n"
      "  for (int x : xs) { use(x); }\n"
      "  switch (n) { case 1: a(); break; default: b(); }\n"
      "  r();\n"
      "}",
      Language::Java));
  add_control_edges(g);
  int fe = find_node(g.ast, "ForEachStatement", "");
  REQUIRE(fe >= 0);
  const auto& fch = g.ast.node(fe).children;
  int iter = fch[fch.size() - 2];
  int body = fch.back();
  int sw = find_node(g.ast, "SwitchStatement", "");
  CHECK(has_edge(g, iter, body, EdgeType::Control));
  CHECK(has_edge(g, g.ast.node(body).children.back(), iter, EdgeType::Control));
  CHECK(has_edge(g, iter, sw, EdgeType::Control));

  const auto& sch = g.ast.node(sw).children;
  REQUIRE(sch.size() == 3);
  int selector = sch[0];
  int r_stmt = -1;
  for (int id : g.ast.preorder())
    if (g.ast.node(id).kind == "StatementExpression" &&
        g.ast.node(g.ast.node(id).parent).kind == "MethodDeclaration")
      r_stmt = id;
  CHECK(has_edge(g, selector, sch[1], EdgeType::Control));
  CHECK(has_edge(g, selector, sch[2], EdgeType::Control));
  CHECK(has_edge(g, sch[1], r_stmt, EdgeType::Control));
  CHECK(has_edge(g, sch[2], r_stmt, EdgeType::Control));
}

TEST_CASE("python control wiring over body containers") {
  SemanticGraph g = add_base_edges(extended(
      "def f(xs, n):\n"
      "    if n > 0:\n"
      "        a = 1\n"
      "    else:\n"
      "        a = 2\n"
      "    for x in xs:\n"
      "        n = n - 1\n"
      "    while n > 0:\n"
      "        n = n + 1\n"
      "    return n\n",
      Language::Python));
  add_control_edges(g);

  int iff = find_node(g.ast, "If", "");
  const auto& ich = g.ast.node(iff).children;
  REQUIRE(ich.size() == 3);
  int for_node = find_node(g.ast, "For", "");
  CHECK(has_edge(g, ich[0], ich[1], EdgeType::Control));
  CHECK(has_edge(g, ich[0], ich[2], EdgeType::Control));
  CHECK(has_edge(g, ich[1], for_node, EdgeType::Control));

  const auto& fch = g.ast.node(for_node).children;
  REQUIRE(fch.size() == 3);
  int while_node = find_node(g.ast, "While", "");
  CHECK(has_edge(g, fch[1], fch[2], EdgeType::Control));
  CHECK(has_edge(g, g.ast.node(fch[2]).children.back(), fch[1], EdgeType::Control));
  CHECK(has_edge(g, fch[1], while_node, EdgeType::Control));

  const auto& wch = g.ast.node(while_node).children;
  REQUIRE(wch.size() == 2);
  int ret = find_node(g.ast, "Return", "");
  CHECK(has_edge(g, wch[0], wch[1], EdgeType::Control));
  CHECK(has_edge(g, g.ast.node(wch[1]).children.back(), wch[0], EdgeType::Control));
  CHECK(has_edge(g, wch[0], ret, EdgeType::Control));
  CHECK(count_type(g, EdgeType::Control) == 9);
}

TEST_CASE("straight-line code has no control edges") {
  SemanticGraph g = add_base_edges(extended(
      "int f(int a) { int b = a + 1; return b; }", Language::Java));
  add_control_edges(g);
  CHECK(count_type(g, EdgeType::Control) == 0);
}

TEST_CASE("control patterns can be disabled individually") {
  ExtendedAst ast = extended(
      "void f(int c) { while (c > 0) { c--; } if (c < 0) { s(); } }", Language::Java);
  ControlEdgeOptions opt;
  opt.loop_while = false;
  SemanticGraph g = add_base_edges(std::move(ast));
  add_control_edges(g, opt);
  int iff = find_node(g.ast, "IfStatement", "");
  const auto& ich = g.ast.node(iff).children;
  // only the if pattern fired: cond->then, and the if statement has no next
  // sibling so there is no exit edge
  REQUIRE(count_type(g, EdgeType::Control) == 1);
  CHECK(has_edge(g, ich[0], ich[1], EdgeType::Control));
}

TEST_CASE("reversed and self edges") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int c) { while (c > 0) { c--; } }", Language::Java));
  add_control_edges(g);
  size_t forward = g.edges.size();
  add_reverse_and_self_edges(g);
  CHECK(g.edges.size() == 2 * forward + static_cast<size_t>(g.ast.size()));
  CHECK(count_type(g, EdgeType::Self) == static_cast<size_t>(g.ast.size()));
  CHECK(count_type(g, EdgeType::ChildRev) == count_type(g, EdgeType::Child));
  CHECK(count_type(g, EdgeType::ControlRev) == count_type(g, EdgeType::Control));
  for (const Edge& e : edges_of_type(g, EdgeType::Child))
    CHECK(has_edge(g, e.dst, e.src, EdgeType::ChildRev));

  // idempotence: applying again leaves the multiset unchanged
  std::vector<Edge> before = sorted_edges(g.edges);
  add_reverse_and_self_edges(g);
  CHECK(sorted_edges(g.edges) == before);
}

TEST_CASE("single node graph gains exactly one self edge") {
  ExtendedAst ast;
  ast.nodes.resize(1);
  ast.nodes[0] = {0, "L", "x", true, -1, {}, false};
  ast.root = 0;
  SemanticGraph g = add_base_edges(std::move(ast));
  CHECK(g.edges.empty());
  add_reverse_and_self_edges(g);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == Edge{0, 0, EdgeType::Self});
}

TEST_CASE("node ordering puts leaves before internals and masks padding") {
  SemanticGraph g = add_base_edges(extended(
      "int f(int a) { return a + 1; }", Language::Java));
  auto leaves = g.ast.leaves_in_order();
  size_t n_leaves = leaves.size();
  size_t n_nodes = static_cast<size_t>(g.ast.size());

  NodeOrdering full = order_nodes(g, 300);
  REQUIRE(full.selected.size() == n_nodes);
  CHECK(full.mask.size() == 300);
  for (size_t i = 0; i < n_leaves; ++i) {
    CHECK(full.selected[i] == leaves[i]);
  }
  for (size_t i = n_leaves; i < n_nodes; ++i) {
    CHECK_FALSE(g.ast.node(full.selected[i]).leaf);
  }
  CHECK(full.selected[n_leaves] == g.ast.root);  // root is first internal node
  size_t masked = 0;
  for (auto b : full.mask)
    if (!b) ++masked;
  CHECK(masked == 300 - n_nodes);

  NodeOrdering trunc = order_nodes(g, static_cast<int>(n_leaves) + 1);
  REQUIRE(trunc.selected.size() == n_leaves + 1);
  CHECK(trunc.selected.back() == g.ast.root);

  NodeOrdering one = order_nodes(g, 1);
  REQUIRE(one.selected.size() == 1);
  CHECK(one.selected[0] == leaves[0]);
  CHECK(one.mask == std::vector<uint8_t>{1});

  CHECK_THROWS_AS(order_nodes(g, 0), DataError);
}

TEST_CASE("graph construction is equivariant under node relabeling") {
  ExtendedAst ast = extended(
      "void f(int c) { while (c > 0) { c--; } if (c == 0) { s(); } }", Language::Java);
  int n = ast.size();
  // permutation: reverse the ids
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = n - 1 - i;

  ExtendedAst relabeled;
  relabeled.nodes.resize(static_cast<size_t>(n));
  for (const AstNode& src : ast.nodes) {
    AstNode nn = src;
    nn.id = perm[static_cast<size_t>(src.id)];
    if (nn.parent >= 0) nn.parent = perm[static_cast<size_t>(nn.parent)];
    for (auto& c : nn.children) c = perm[static_cast<size_t>(c)];
    relabeled.nodes[static_cast<size_t>(nn.id)] = std::move(nn);
  }
  relabeled.root = perm[static_cast<size_t>(ast.root)];
  relabeled.validate();

  SemanticGraph g1 = build_graph(std::move(ast));
  SemanticGraph g2 = build_graph(std::move(relabeled));
  std::vector<Edge> mapped;
  for (const Edge& e : g1.edges)
    mapped.push_back({perm[static_cast<size_t>(e.src)], perm[static_cast<size_t>(e.dst)], e.type});
  CHECK(sorted_edges(mapped) == sorted_edges(g2.edges));
}

TEST_CASE("serialization round-trips nodes and edges") {
  SemanticGraph g = build_graph(
      extended("def f(n):\n    if n > 0:\n        return n\n    return 0\n",
               Language::Python),
      "sample-1");
  std::string line = serialize_graph(g);
  CHECK(line.find('\n') == std::string::npos);
  SemanticGraph h = deserialize_graph(line);
  CHECK(h.id == g.id);
  REQUIRE(h.ast.size() == g.ast.size());
  for (int i = 0; i < g.ast.size(); ++i) {
    CHECK(h.ast.node(i).kind == g.ast.node(i).kind);
    CHECK(h.ast.node(i).text == g.ast.node(i).text);
    CHECK(h.ast.node(i).leaf == g.ast.node(i).leaf);
    CHECK(h.ast.node(i).parent == g.ast.node(i).parent);
    CHECK(h.ast.node(i).children == g.ast.node(i).children);
  }
  CHECK(h.ast.root == g.ast.root);
  CHECK(h.edges == g.edges);
  // serialize again: byte-identical
  CHECK(serialize_graph(h) == line);
}

TEST_CASE("malformed graph lines raise FormatError") {
  SemanticGraph g = build_graph(extended("void f() { s(); }", Language::Java), "x");
  std::string line = serialize_graph(g);
  CHECK_THROWS_AS(deserialize_graph(""), FormatError);
  CHECK_THROWS_AS(deserialize_graph(line.substr(0, line.size() / 2)), FormatError);
  CHECK_THROWS_AS(deserialize_graph("{\"id\":\"x\",\"nodes\":[],\"edges\":[]}"),
                  FormatError);
  CHECK_THROWS_AS(
      deserialize_graph("{\"id\":\"x\",\"nodes\":[{\"id\":0,\"kind\":\"L\",\"text\":"
                        "\"a\",\"leaf\":true}],\"edges\":[{\"s\":0,\"d\":5,\"t\":"
                        "\"Child\"}]}"),
      FormatError);
  CHECK_THROWS_AS(
      deserialize_graph("{\"id\":\"x\",\"nodes\":[{\"id\":0,\"kind\":\"L\",\"text\":"
                        "\"a\",\"leaf\":true}],\"edges\":[{\"s\":0,\"d\":0,\"t\":"
                        "\"Sideways\"}]}"),
      FormatError);
}

TEST_CASE("edge type names round-trip") {
  for (int i = 0; i < kNumEdgeTypes; ++i) {
    EdgeType t = static_cast<EdgeType>(i);
    CHECK(edge_type_from_string(to_string(t)) == t);
  }
  CHECK_THROWS_AS(edge_type_from_string("Bogus"), FormatError);
  CHECK(reversed(EdgeType::Child) == EdgeType::ChildRev);
  CHECK(reversed(EdgeType::Control) == EdgeType::ControlRev);
  CHECK_THROWS_AS(reversed(EdgeType::Self), DataError);
  CHECK_THROWS_AS(reversed(EdgeType::ChildRev), DataError);
}

TEST_CASE("control edges stay within or exit one level above their statement") {
  SemanticGraph g = add_base_edges(extended(
      "void f(int n) {\n"
      "  for (int i = 0; i < n; i++) { if (i == 2) { s(); } }\n"
      "  t();\n"
      "}",
      Language::Java));
  add_control_edges(g);
  // For every control edge, walk up from src: we must reach either dst's
  // parent chain within the same control statement, or dst is a sibling of a
  // control statement containing src.
  for (const Edge& e : edges_of_type(g, EdgeType::Control)) {
    // find nearest enclosing control statement of src (inclusive)
    auto is_ctrl = [&](int id) {
      const std::string& k = g.ast.node(id).kind;
      return k == "IfStatement" || k == "WhileStatement" || k == "DoStatement" ||
             k == "ForStatement" || k == "ForEachStatement" || k == "SwitchStatement" ||
             k == "If" || k == "While" || k == "For";
    };
    // some enclosing control statement of src must contain dst in its
    // subtree, or have dst as one of its siblings (the exit edge case)
    bool ok = false;
    for (int stmt = e.src; stmt >= 0; stmt = g.ast.node(stmt).parent) {
      if (!is_ctrl(stmt)) continue;
      bool inside = false;
      for (int cur = e.dst; cur >= 0; cur = g.ast.node(cur).parent)
        if (cur == stmt) inside = true;
      bool sibling = g.ast.node(e.dst).parent == g.ast.node(stmt).parent;
      if (inside || sibling) {
        ok = true;
        break;
      }
    }
    CHECK(ok);
  }
}
