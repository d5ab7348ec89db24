#pragma once

#include <string>
#include <vector>

namespace gypsum {

enum class Language { Java, Python };
Language language_from_string(const std::string& s);
const char* to_string(Language lang);

// One training/evaluation record: a code snippet and its reference summary.
struct SourceSnippet {
  std::string id;
  std::string code;
  Language language = Language::Java;
  std::string summary;  // may be empty at inference time
};

struct AstNode {
  int id = -1;
  std::string kind;  // grammar class label (internal) or token class (leaf)
  // Leaf: surface text. Internal: attribute text not yet materialized as a
  // leaf (Python parser output), or the pre-split identifier on _SplitNode_.
  std::string text;
  bool leaf = false;
  int parent = -1;
  std::vector<int> children;  // ordered
  // Ephemeral, not serialized: marks variable-like nodes (identifier leaves
  // and split identifier groups) that participate in next-use chaining.
  bool identifier = false;
};

// AST with explicit node storage; ids index into `nodes`.
struct ExtendedAst {
  std::vector<AstNode> nodes;
  int root = 0;

  AstNode& node(int id) { return nodes[static_cast<size_t>(id)]; }
  const AstNode& node(int id) const { return nodes[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(nodes.size()); }

  // Depth-first pre-order; children visited in stored order. For leaves this
  // is source order, which is what token-order edges rely on.
  std::vector<int> preorder() const;
  std::vector<int> leaves_in_order() const;

  // Relabel ids so that preorder position == id. Canonical form for
  // serialization: child ids ascend in sibling order, root == 0.
  void renumber_preorder();

  // Structural invariants; throws DataError when violated.
  void validate() const;
};

}  // namespace gypsum
