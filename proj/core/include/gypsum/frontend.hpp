#pragma once

#include <string>

#include "gypsum/ast.hpp"
#include "gypsum/tokenizer.hpp"

namespace gypsum {

// Parse source into the raw AST: internal nodes carry grammar class labels;
// leaves carry source token text. The Python parser stores some attribute
// texts (function names, argument names, attribute names, constants) on
// internal nodes, to be materialized as leaves by extend_ast. Throws
// ParseError with line/column on ungrammatical input.
ExtendedAst parse_source(const SourceSnippet& snippet);

ExtendedAst parse_java(const std::string& code);
ExtendedAst parse_python(const std::string& code);

// Post-parse extension:
//   1. materialize pending attribute texts as leaves (Python augmentation);
//   2. replace every leaf whose text splits into >1 sub-word with a
//      `_SplitNode_` internal node whose children are the sub-word leaves;
//      single-sub-word leaf texts are normalized to their sub-word form.
// Idempotent; output ids are canonical preorder.
ExtendedAst extend_ast(ExtendedAst ast, const Tokenizer& tokenizer, Language language);

}  // namespace gypsum
