#include "gypsum/frontend.hpp"

#include <string>
#include <vector>

#include "gypsum/errors.hpp"

namespace gypsum {

namespace {

// Node kinds whose materialized name binds a variable-like identifier and
// should participate in use-chain edges.
bool binds_identifier(const std::string& kind) {
  return kind == "FunctionDef" || kind == "ClassDef" || kind == "arg" ||
         kind == "ExceptHandler";
}

}  // namespace

ExtendedAst parse_source(const SourceSnippet& snippet) {
  return snippet.language == Language::Java ? parse_java(snippet.code)
                                            : parse_python(snippet.code);
}

ExtendedAst extend_ast(ExtendedAst ast, const Tokenizer& tokenizer, Language language) {
  // Stage 1: materialize attribute texts held on internal nodes as leaves so
  // every piece of source text sits on a leaf. A childless text node (a
  // literal) becomes a leaf itself; a node with children gets a new leaf
  // child — appended for attribute access (value.attr order), prepended
  // otherwise. The attribute text is cleared so a second pass is a no-op.
  if (language == Language::Python) {
    size_t n0 = ast.nodes.size();
    for (size_t i = 0; i < n0; ++i) {
      if (ast.nodes[i].leaf || ast.nodes[i].text.empty() ||
          ast.nodes[i].kind == "_SplitNode_")
        continue;
      if (ast.nodes[i].kind == "Constant") {
        ast.nodes[i].leaf = true;  // literal value node carries its own text
        continue;
      }
      AstNode leaf;
      leaf.id = static_cast<int>(ast.nodes.size());
      bool named = binds_identifier(ast.nodes[i].kind);
      leaf.kind = named ? "Name" : "identifier";
      leaf.identifier = named;
      leaf.leaf = true;
      leaf.text = ast.nodes[i].text;
      leaf.parent = static_cast<int>(i);
      bool append = ast.nodes[i].kind == "Attribute";
      ast.nodes.push_back(std::move(leaf));
      auto& ch = ast.nodes[i].children;
      if (append)
        ch.push_back(static_cast<int>(ast.nodes.size()) - 1);
      else
        ch.insert(ch.begin(), static_cast<int>(ast.nodes.size()) - 1);
      ast.nodes[i].text.clear();
    }
  }

  // Stage 2: split leaf texts into sub-words. A leaf splitting into several
  // sub-words becomes a `_SplitNode_` internal node that keeps the original
  // text and identifier flag; its children are sub-word leaves of the
  // original kind. A single-sub-word leaf just has its text normalized.
  // Both outcomes are fixed points, so the stage is idempotent.
  size_t n1 = ast.nodes.size();
  for (size_t i = 0; i < n1; ++i) {
    if (!ast.nodes[i].leaf) continue;
    std::vector<std::string> subs = tokenizer.split(ast.nodes[i].text);
    if (subs.empty()) continue;
    if (subs.size() == 1) {
      ast.nodes[i].text = subs[0];
      continue;
    }
    std::string child_kind = ast.nodes[i].kind;
    ast.nodes[i].kind = "_SplitNode_";
    ast.nodes[i].leaf = false;
    for (const std::string& sub : subs) {
      AstNode leaf;
      leaf.id = static_cast<int>(ast.nodes.size());
      leaf.kind = child_kind;
      leaf.leaf = true;
      leaf.text = sub;
      leaf.parent = static_cast<int>(i);
      ast.nodes[i].children.push_back(leaf.id);
      ast.nodes.push_back(std::move(leaf));
    }
  }

  ast.renumber_preorder();
  ast.validate();
  return ast;
}

}  // namespace gypsum
