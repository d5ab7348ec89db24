#include "gypsum/ast.hpp"

#include <algorithm>

#include "gypsum/errors.hpp"

namespace gypsum {

Language language_from_string(const std::string& s) {
  if (s == "java") return Language::Java;
  if (s == "python") return Language::Python;
  throw DataError("unsupported language: " + s);
}

const char* to_string(Language lang) {
  return lang == Language::Java ? "java" : "python";
}

std::vector<int> ExtendedAst::preorder() const {
  std::vector<int> order;
  order.reserve(nodes.size());
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = node(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

std::vector<int> ExtendedAst::leaves_in_order() const {
  std::vector<int> out;
  for (int id : preorder())
    if (node(id).leaf) out.push_back(id);
  return out;
}

void ExtendedAst::renumber_preorder() {
  std::vector<int> order = preorder();
  if (order.size() != nodes.size())
    throw DataError("AST has nodes unreachable from the root");
  std::vector<int> remap(nodes.size(), -1);
  for (size_t pos = 0; pos < order.size(); ++pos) remap[static_cast<size_t>(order[pos])] = static_cast<int>(pos);
  std::vector<AstNode> renum(nodes.size());
  for (size_t old = 0; old < nodes.size(); ++old) {
    AstNode n = nodes[old];
    n.id = remap[old];
    if (n.parent >= 0) n.parent = remap[static_cast<size_t>(n.parent)];
    for (auto& c : n.children) c = remap[static_cast<size_t>(c)];
    renum[static_cast<size_t>(n.id)] = std::move(n);
  }
  nodes = std::move(renum);
  root = 0;
}

void ExtendedAst::validate() const {
  if (nodes.empty()) throw DataError("AST is empty");
  if (root < 0 || root >= size()) throw DataError("AST root id out of range");
  int parentless = 0;
  for (const auto& n : nodes) {
    if (n.id < 0 || n.id >= size() || &node(n.id) != &n)
      throw DataError("AST node id does not match its index");
    if (n.parent < 0) {
      ++parentless;
      if (n.id != root) throw DataError("non-root AST node without a parent");
    } else {
      const auto& p = node(n.parent);
      if (std::find(p.children.begin(), p.children.end(), n.id) == p.children.end())
        throw DataError("AST parent does not list the node as a child");
    }
    for (int c : n.children) {
      if (c < 0 || c >= size() || node(c).parent != n.id)
        throw DataError("AST child link is inconsistent");
    }
    if (n.leaf) {
      if (!n.children.empty()) throw DataError("leaf node has children");
      if (n.text.empty()) throw DataError("leaf node has empty text");
    }
    if (n.kind == "_SplitNode_") {
      if (n.children.size() < 2) throw DataError("_SplitNode_ with fewer than 2 children");
      for (int c : n.children)
        if (!node(c).leaf) throw DataError("_SplitNode_ child is not a leaf");
    }
  }
  if (parentless != 1) throw DataError("AST must have exactly one root");
}

}  // namespace gypsum
