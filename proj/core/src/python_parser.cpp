#include <cctype>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gypsum/ast.hpp"
#include "gypsum/errors.hpp"
#include "gypsum/frontend.hpp"

namespace gypsum {

namespace {

const std::unordered_set<std::string> kPyKeywords = {
    "def",    "return", "if",     "elif",  "else",   "while",  "for",
    "in",     "break",  "continue", "pass", "class",  "import", "from",
    "and",    "or",     "not",    "is",    "None",   "True",   "False",
    "lambda", "try",    "except", "finally", "raise", "with",   "as",
    "global", "nonlocal", "del",  "assert", "yield"};

const char* kPyMultiOps[] = {"**=", "//=", ">>=", "<<=", "->", "**", "//",
                             "<<",  ">>",  "<=",  ">=",  "==", "!=", "+=",
                             "-=",  "*=",  "/=",  "%=",  "&=", "|=", "^=",
                             ":="};

struct Tok {
  enum K { Ident, Kw, Num, Str, Punct, Newline, Indent, Dedent, End } k = End;
  std::string s;
  int line = 0, col = 0;
};

class PythonLexer {
 public:
  explicit PythonLexer(const std::string& src) : src_(src) {}

  std::vector<Tok> run() {
    std::vector<Tok> out;
    std::vector<int> indents{0};
    bool at_line_start = true;
    bool line_had_token = false;
    int depth = 0;  // bracket nesting: () [] {}

    while (i_ <= src_.size()) {
      if (at_line_start && depth == 0) {
        int col = 0;
        while (i_ < src_.size() && (src_[i_] == ' ' || src_[i_] == '\t')) {
          col += src_[i_] == '\t' ? 8 - (col % 8) : 1;
          adv();
        }
        if (i_ >= src_.size()) break;
        if (src_[i_] == '\n') {  // blank line
          adv();
          continue;
        }
        if (src_[i_] == '#') {  // comment-only line
          while (i_ < src_.size() && src_[i_] != '\n') adv();
          if (i_ < src_.size()) adv();
          continue;
        }
        if (col > indents.back()) {
          indents.push_back(col);
          out.push_back({Tok::Indent, "", line_, 1});
        }
        while (col < indents.back()) {
          indents.pop_back();
          out.push_back({Tok::Dedent, "", line_, 1});
        }
        if (col != indents.back())
          throw ParseError("inconsistent indentation", line_, 1);
        at_line_start = false;
        line_had_token = false;
      }
      if (i_ >= src_.size()) break;
      char c = src_[i_];
      if (c == '\n') {
        adv();
        if (depth == 0) {
          if (line_had_token) out.push_back({Tok::Newline, "", line_ - 1, 0});
          at_line_start = true;
        }
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        adv();
        continue;
      }
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') adv();
        continue;
      }
      if (c == '\\' && i_ + 1 < src_.size() && src_[i_ + 1] == '\n') {
        adv();
        adv();
        continue;
      }
      line_had_token = true;
      out.push_back(next_token(depth));
    }
    if (line_had_token_pending(out)) out.push_back({Tok::Newline, "", line_, 0});
    while (indents.size() > 1) {
      indents.pop_back();
      out.push_back({Tok::Dedent, "", line_, 1});
    }
    out.push_back({Tok::End, "", line_, 1});
    return out;
  }

 private:
  const std::string& src_;
  size_t i_ = 0;
  int line_ = 1, col_ = 1;

  static bool line_had_token_pending(const std::vector<Tok>& out) {
    return !out.empty() && out.back().k != Tok::Newline && out.back().k != Tok::Dedent &&
           out.back().k != Tok::Indent;
  }

  void adv() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  Tok next_token(int& depth) {
    int line = line_, col = col_;
    char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (i_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[i_])) ||
                                  src_[i_] == '_')) {
        s += src_[i_];
        adv();
      }
      // String prefixes (r"", f'', b"" ...) directly followed by a quote.
      if (s.size() <= 2 && i_ < src_.size() && (src_[i_] == '"' || src_[i_] == '\'')) {
        bool prefix = true;
        for (char pc : s) {
          char lo = static_cast<char>(std::tolower(static_cast<unsigned char>(pc)));
          if (lo != 'r' && lo != 'f' && lo != 'b' && lo != 'u') prefix = false;
        }
        if (prefix) return lex_string(s, line, col);
      }
      return {kPyKeywords.count(s) ? Tok::Kw : Tok::Ident, s, line, col};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      std::string s;
      bool hex = c == '0' && i_ + 1 < src_.size() &&
                 (src_[i_ + 1] == 'x' || src_[i_ + 1] == 'X');
      while (i_ < src_.size()) {
        char ch = src_[i_];
        bool ok = std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_';
        if (hex && std::isxdigit(static_cast<unsigned char>(ch))) ok = true;
        char lo = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (lo == 'x' || lo == 'j' || (!hex && lo == 'e')) ok = true;
        if (!s.empty() && std::tolower(static_cast<unsigned char>(s.back())) == 'e' &&
            (ch == '+' || ch == '-') && !hex)
          ok = true;
        if (!ok) break;
        s += ch;
        adv();
      }
      return {Tok::Num, s, line, col};
    }
    if (c == '"' || c == '\'') return lex_string("", line, col);
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    for (const char* op : kPyMultiOps) {
      size_t n = std::char_traits<char>::length(op);
      if (src_.compare(i_, n, op) == 0) {
        for (size_t k = 0; k < n; ++k) adv();
        return {Tok::Punct, op, line, col};
      }
    }
    adv();
    return {Tok::Punct, std::string(1, c), line, col};
  }

  Tok lex_string(std::string prefix, int line, int col) {
    char quote = src_[i_];
    std::string s = std::move(prefix);
    bool triple = src_.compare(i_, 3, std::string(3, quote)) == 0;
    if (triple) {
      s += std::string(3, quote);
      adv();
      adv();
      adv();
      while (i_ < src_.size() && src_.compare(i_, 3, std::string(3, quote)) != 0) {
        s += src_[i_];
        adv();
      }
      if (i_ >= src_.size()) throw ParseError("unterminated string", line, col);
      s += std::string(3, quote);
      adv();
      adv();
      adv();
    } else {
      s += quote;
      adv();
      while (i_ < src_.size() && src_[i_] != quote) {
        if (src_[i_] == '\\') {
          s += src_[i_];
          adv();
          if (i_ >= src_.size()) break;
        } else if (src_[i_] == '\n') {
          throw ParseError("unterminated string", line, col);
        }
        s += src_[i_];
        adv();
      }
      if (i_ >= src_.size()) throw ParseError("unterminated string", line, col);
      s += quote;
      adv();
    }
    return {Tok::Str, s, line, col};
  }
};

class PythonParser {
 public:
  explicit PythonParser(const std::string& code) : toks_(PythonLexer(code).run()) {}

  ExtendedAst run() {
    std::vector<int> stmts;
    while (!at_end()) {
      if (tok().k == Tok::Newline) {
        ++p_;
        continue;
      }
      parse_statement_into(stmts);
    }
    if (stmts.empty()) throw ParseError("empty input", 1, 1);
    if (stmts.size() == 1) {
      ast_.root = stmts[0];
    } else {
      int root = mk("Module");
      for (int s : stmts) attach(root, s);
      ast_.root = root;
    }
    ast_.renumber_preorder();
    ast_.validate();
    return std::move(ast_);
  }

 private:
  std::vector<Tok> toks_;
  size_t p_ = 0;
  ExtendedAst ast_;

  const Tok& tok(size_t off = 0) const {
    size_t k = p_ + off;
    return k < toks_.size() ? toks_[k] : toks_.back();
  }
  bool at_end() const { return tok().k == Tok::End; }
  bool is_punct(const char* s, size_t off = 0) const {
    return tok(off).k == Tok::Punct && tok(off).s == s;
  }
  bool is_kw(const char* s, size_t off = 0) const {
    return tok(off).k == Tok::Kw && tok(off).s == s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg + " (found '" + tok().s + "')", tok().line, tok().col);
  }
  void expect_punct(const char* s) {
    if (!is_punct(s)) fail(std::string("expected '") + s + "'");
    ++p_;
  }
  void expect_kw(const char* s) {
    if (!is_kw(s)) fail(std::string("expected '") + s + "'");
    ++p_;
  }
  std::string expect_ident() {
    if (tok().k != Tok::Ident) fail("expected identifier");
    return toks_[p_++].s;
  }
  void expect_newline() {
    if (tok().k == Tok::Newline) {
      ++p_;
      return;
    }
    if (tok().k == Tok::Dedent || at_end()) return;
    fail("expected end of line");
  }

  int mk(const std::string& kind) {
    AstNode n;
    n.id = static_cast<int>(ast_.nodes.size());
    n.kind = kind;
    ast_.nodes.push_back(std::move(n));
    return ast_.nodes.back().id;
  }
  int mk_leaf(const std::string& kind, const std::string& text, bool ident = false) {
    int id = mk(kind);
    ast_.nodes[static_cast<size_t>(id)].leaf = true;
    ast_.nodes[static_cast<size_t>(id)].text = text;
    ast_.nodes[static_cast<size_t>(id)].identifier = ident;
    return id;
  }
  // Internal node holding attribute text to be materialized by extend_ast.
  int mk_attr(const std::string& kind, const std::string& text) {
    int id = mk(kind);
    ast_.nodes[static_cast<size_t>(id)].text = text;
    return id;
  }
  void attach(int parent, int child) {
    ast_.nodes[static_cast<size_t>(parent)].children.push_back(child);
    ast_.nodes[static_cast<size_t>(child)].parent = parent;
  }

  // ---- statements ----

  void parse_statement_into(std::vector<int>& out) {
    if (is_kw("def") || is_punct("@")) {
      out.push_back(parse_function_def());
      return;
    }
    if (is_kw("class")) {
      out.push_back(parse_class_def());
      return;
    }
    if (is_kw("if")) {
      out.push_back(parse_if());
      return;
    }
    if (is_kw("while")) {
      out.push_back(parse_while());
      return;
    }
    if (is_kw("for")) {
      out.push_back(parse_for());
      return;
    }
    if (is_kw("try")) {
      out.push_back(parse_try());
      return;
    }
    if (is_kw("with")) {
      out.push_back(parse_with());
      return;
    }
    // simple statement line: stmt (';' stmt)* NEWLINE
    out.push_back(parse_simple_statement());
    while (is_punct(";")) {
      ++p_;
      if (tok().k == Tok::Newline || tok().k == Tok::Dedent || at_end()) break;
      out.push_back(parse_simple_statement());
    }
    expect_newline();
  }

  // ':' then an indented block (or inline simple statements); returns the
  // parsed statement ids without wrapping them.
  std::vector<int> parse_block() {
    std::vector<int> stmts;
    expect_punct(":");
    if (tok().k == Tok::Newline) {
      ++p_;
      if (tok().k != Tok::Indent) fail("expected an indented block");
      ++p_;
      while (tok().k != Tok::Dedent && !at_end()) {
        if (tok().k == Tok::Newline) {
          ++p_;
          continue;
        }
        parse_statement_into(stmts);
      }
      if (tok().k == Tok::Dedent) ++p_;
    } else {
      stmts.push_back(parse_simple_statement());
      while (is_punct(";")) {
        ++p_;
        if (tok().k == Tok::Newline || tok().k == Tok::Dedent || at_end()) break;
        stmts.push_back(parse_simple_statement());
      }
      expect_newline();
    }
    if (stmts.empty()) fail("empty block");
    return stmts;
  }

  // Block wrapped in a container node ("body", "orelse", "finalbody") so a
  // branch can be addressed as a single graph node.
  int parse_suite(const std::string& container_kind) {
    int c = mk(container_kind);
    for (int s : parse_block()) attach(c, s);
    return c;
  }

  int parse_function_def() {
    std::vector<int> decorators;
    while (is_punct("@")) {
      ++p_;
      decorators.push_back(parse_expression());
      expect_newline();
    }
    if (is_kw("class")) return finish_class_def(decorators);
    expect_kw("def");
    int f = mk_attr("FunctionDef", expect_ident());
    for (int d : decorators) attach(f, d);
    attach(f, parse_parameters());
    if (is_punct("->")) {  // return annotation, parsed but not modeled
      ++p_;
      size_t n0 = ast_.nodes.size();
      parse_expression();
      ast_.nodes.resize(n0);
    }
    // Function body statements are direct children, so statement-level
    // sibling lookups work at function level too.
    for (int s : parse_block()) attach(f, s);
    return f;
  }

  int parse_class_def() { return finish_class_def({}); }

  int finish_class_def(const std::vector<int>& decorators) {
    expect_kw("class");
    int c = mk_attr("ClassDef", expect_ident());
    for (int d : decorators) attach(c, d);
    if (is_punct("(")) {
      ++p_;
      if (!is_punct(")")) {
        attach(c, parse_expression());
        while (is_punct(",")) {
          ++p_;
          if (is_punct(")")) break;
          attach(c, parse_expression());
        }
      }
      expect_punct(")");
    }
    for (int s : parse_block()) attach(c, s);
    return c;
  }

  int parse_parameters() {
    int args = mk("arguments");
    expect_punct("(");
    while (!is_punct(")")) {
      if (is_punct("*")) {
        ++p_;
        if (is_punct(")") || is_punct(",")) {  // bare * separator
          if (is_punct(",")) ++p_;
          continue;
        }
        int a = mk_attr("arg", expect_ident());
        attach(args, a);
      } else if (is_punct("**")) {
        ++p_;
        int a = mk_attr("arg", expect_ident());
        attach(args, a);
      } else {
        int a = mk_attr("arg", expect_ident());
        if (is_punct(":")) {  // annotation
          ++p_;
          attach(a, parse_expression());
        }
        if (is_punct("=")) {  // default value
          ++p_;
          attach(a, parse_expression());
        }
        attach(args, a);
      }
      if (is_punct(","))
        ++p_;
      else
        break;
    }
    expect_punct(")");
    return args;
  }

  int parse_if() {
    expect_kw("if");
    int node = mk("If");
    attach(node, parse_expression());
    attach(node, parse_suite("body"));
    if (is_kw("elif")) {
      // elif = else containing a nested If
      int orelse = mk("orelse");
      toks_[p_].s = "if";  // rewrite and recurse
      attach(orelse, parse_if());
      attach(node, orelse);
    } else if (is_kw("else")) {
      ++p_;
      attach(node, parse_suite("orelse"));
    }
    return node;
  }

  int parse_while() {
    expect_kw("while");
    int w = mk("While");
    attach(w, parse_expression());
    attach(w, parse_suite("body"));
    if (is_kw("else")) {
      ++p_;
      attach(w, parse_suite("orelse"));
    }
    return w;
  }

  int parse_for() {
    expect_kw("for");
    int f = mk("For");
    attach(f, parse_target_list());
    expect_kw("in");
    attach(f, parse_expression_list());
    attach(f, parse_suite("body"));
    if (is_kw("else")) {
      ++p_;
      attach(f, parse_suite("orelse"));
    }
    return f;
  }

  int parse_try() {
    expect_kw("try");
    int t = mk("Try");
    attach(t, parse_suite("body"));
    while (is_kw("except")) {
      ++p_;
      int h = mk_attr("ExceptHandler", "");
      if (!is_punct(":")) {
        attach(h, parse_expression());
        if (is_kw("as")) {
          ++p_;
          ast_.node(h).text = expect_ident();
        }
      }
      attach(h, parse_suite("body"));
      attach(t, h);
    }
    if (is_kw("else")) {
      ++p_;
      attach(t, parse_suite("orelse"));
    }
    if (is_kw("finally")) {
      ++p_;
      attach(t, parse_suite("finalbody"));
    }
    return t;
  }

  int parse_with() {
    expect_kw("with");
    int w = mk("With");
    auto item = [&] {
      int it = mk("withitem");
      attach(it, parse_expression());
      if (is_kw("as")) {
        ++p_;
        attach(it, parse_target());
      }
      return it;
    };
    attach(w, item());
    while (is_punct(",")) {
      ++p_;
      attach(w, item());
    }
    attach(w, parse_suite("body"));
    return w;
  }

  int parse_simple_statement() {
    if (is_kw("return")) {
      ++p_;
      int r = mk("Return");
      if (tok().k != Tok::Newline && !is_punct(";") && tok().k != Tok::Dedent && !at_end())
        attach(r, parse_expression_list());
      return r;
    }
    if (is_kw("pass")) {
      ++p_;
      return mk_leaf("Pass", "pass");
    }
    if (is_kw("break")) {
      ++p_;
      return mk_leaf("Break", "break");
    }
    if (is_kw("continue")) {
      ++p_;
      return mk_leaf("Continue", "continue");
    }
    if (is_kw("raise")) {
      ++p_;
      int r = mk("Raise");
      if (tok().k != Tok::Newline && !is_punct(";") && tok().k != Tok::Dedent && !at_end()) {
        attach(r, parse_expression());
        if (is_kw("from")) {
          ++p_;
          attach(r, parse_expression());
        }
      }
      return r;
    }
    if (is_kw("del")) {
      ++p_;
      int d = mk("Delete");
      attach(d, parse_expression());
      while (is_punct(",")) {
        ++p_;
        attach(d, parse_expression());
      }
      return d;
    }
    if (is_kw("assert")) {
      ++p_;
      int a = mk("Assert");
      attach(a, parse_expression());
      if (is_punct(",")) {
        ++p_;
        attach(a, parse_expression());
      }
      return a;
    }
    if (is_kw("global") || is_kw("nonlocal")) {
      std::string kw = toks_[p_++].s;
      int g = mk(kw == "global" ? "Global" : "Nonlocal");
      attach(g, mk_leaf("Name", expect_ident(), /*ident=*/true));
      while (is_punct(",")) {
        ++p_;
        attach(g, mk_leaf("Name", expect_ident(), /*ident=*/true));
      }
      return g;
    }
    if (is_kw("import")) {
      ++p_;
      int im = mk("Import");
      attach(im, mk_leaf("Name", parse_dotted_name(), /*ident=*/true));
      if (is_kw("as")) {
        ++p_;
        attach(im, mk_leaf("Name", expect_ident(), /*ident=*/true));
      }
      while (is_punct(",")) {
        ++p_;
        attach(im, mk_leaf("Name", parse_dotted_name(), /*ident=*/true));
        if (is_kw("as")) {
          ++p_;
          attach(im, mk_leaf("Name", expect_ident(), /*ident=*/true));
        }
      }
      return im;
    }
    if (is_kw("from")) {
      ++p_;
      int im = mk("ImportFrom");
      while (is_punct(".")) ++p_;  // relative import dots
      if (tok().k == Tok::Ident)
        attach(im, mk_leaf("Name", parse_dotted_name(), /*ident=*/true));
      expect_kw("import");
      if (is_punct("*")) {
        ++p_;
        attach(im, mk_leaf("Name", "*"));
        return im;
      }
      bool parens = is_punct("(");
      if (parens) ++p_;
      auto one = [&] {
        attach(im, mk_leaf("Name", expect_ident(), /*ident=*/true));
        if (is_kw("as")) {
          ++p_;
          attach(im, mk_leaf("Name", expect_ident(), /*ident=*/true));
        }
      };
      one();
      while (is_punct(",")) {
        ++p_;
        if (parens && is_punct(")")) break;
        one();
      }
      if (parens) expect_punct(")");
      return im;
    }
    // assignment / augmented assignment / bare expression
    int first = parse_expression_list();
    static const std::unordered_map<std::string, std::string> kAugOps = {
        {"+=", "Add"},    {"-=", "Sub"},    {"*=", "Mult"},  {"/=", "Div"},
        {"//=", "FloorDiv"}, {"%=", "Mod"}, {"**=", "Pow"},  {"&=", "BitAnd"},
        {"|=", "BitOr"},  {"^=", "BitXor"}, {"<<=", "LShift"}, {">>=", "RShift"}};
    if (tok().k == Tok::Punct) {
      auto it = kAugOps.find(tok().s);
      if (it != kAugOps.end()) {
        std::string sym = toks_[p_++].s;
        int a = mk("AugAssign");
        attach(a, first);
        attach(a, mk_leaf(it->second, sym));
        attach(a, parse_expression_list());
        return a;
      }
    }
    if (is_punct("=")) {
      int a = mk("Assign");
      attach(a, first);
      while (is_punct("=")) {
        ++p_;
        attach(a, parse_expression_list());
      }
      return a;
    }
    int e = mk("Expr");
    attach(e, first);
    return e;
  }

  std::string parse_dotted_name() {
    std::string name = expect_ident();
    while (is_punct(".")) {
      ++p_;
      name += "." + expect_ident();
    }
    return name;
  }

  // ---- expressions ----

  int parse_target() { return parse_postfix(); }

  int parse_target_list() {
    int first = parse_target();
    if (!is_punct(",")) return first;
    int t = mk("Tuple");
    attach(t, first);
    while (is_punct(",")) {
      ++p_;
      if (is_kw("in") || is_punct("=")) break;
      attach(t, parse_target());
    }
    return t;
  }

  // expr (',' expr)* — a bare tuple when a comma appears.
  int parse_expression_list() {
    int first = parse_expression();
    if (!is_punct(",")) return first;
    int t = mk("Tuple");
    attach(t, first);
    while (is_punct(",")) {
      ++p_;
      if (tok().k == Tok::Newline || tok().k == Tok::Dedent || is_punct("=") ||
          is_punct(";") || at_end())
        break;
      attach(t, parse_expression());
    }
    return t;
  }

  int parse_expression() {
    if (is_kw("lambda")) return parse_lambda();
    int body = parse_or();
    if (is_kw("if")) {
      ++p_;
      int e = mk("IfExp");
      attach(e, body);
      attach(e, parse_or());
      expect_kw("else");
      attach(e, parse_expression());
      return e;
    }
    return body;
  }

  int parse_lambda() {
    expect_kw("lambda");
    int l = mk("Lambda");
    int args = mk("arguments");
    if (!is_punct(":")) {
      auto one = [&] {
        int a = mk_attr("arg", expect_ident());
        if (is_punct("=")) {
          ++p_;
          attach(a, parse_expression());
        }
        attach(args, a);
      };
      one();
      while (is_punct(",")) {
        ++p_;
        one();
      }
    }
    attach(l, args);
    expect_punct(":");
    attach(l, parse_expression());
    return l;
  }

  int parse_or() {
    int left = parse_and();
    if (!is_kw("or")) return left;
    int b = mk("BoolOp");
    attach(b, left);
    while (is_kw("or")) {
      ++p_;
      attach(b, mk_leaf("Or", "or"));
      attach(b, parse_and());
    }
    return b;
  }

  int parse_and() {
    int left = parse_not();
    if (!is_kw("and")) return left;
    int b = mk("BoolOp");
    attach(b, left);
    while (is_kw("and")) {
      ++p_;
      attach(b, mk_leaf("And", "and"));
      attach(b, parse_not());
    }
    return b;
  }

  int parse_not() {
    if (is_kw("not")) {
      ++p_;
      int u = mk("UnaryOp");
      attach(u, mk_leaf("Not", "not"));
      attach(u, parse_not());
      return u;
    }
    return parse_comparison();
  }

  int parse_comparison() {
    int left = parse_bitor();
    auto comp_op = [&]() -> std::pair<std::string, std::string> {
      if (is_punct("<")) return {"Lt", "<"};
      if (is_punct(">")) return {"Gt", ">"};
      if (is_punct("<=")) return {"LtE", "<="};
      if (is_punct(">=")) return {"GtE", ">="};
      if (is_punct("==")) return {"Eq", "=="};
      if (is_punct("!=")) return {"NotEq", "!="};
      if (is_kw("in")) return {"In", "in"};
      if (is_kw("is") && is_kw("not", 1)) return {"IsNot", "is not"};
      if (is_kw("is")) return {"Is", "is"};
      if (is_kw("not") && is_kw("in", 1)) return {"NotIn", "not in"};
      return {"", ""};
    };
    auto [kind, sym] = comp_op();
    if (kind.empty()) return left;
    int c = mk("Compare");
    attach(c, left);
    while (true) {
      auto [k2, s2] = comp_op();
      if (k2.empty()) break;
      p_ += (s2 == "is not" || s2 == "not in") ? 2 : 1;
      attach(c, mk_leaf(k2, s2));
      attach(c, parse_bitor());
    }
    return c;
  }

  struct BinTier {
    const char* sym;
    const char* kind;
  };

  int parse_bin(const std::vector<BinTier>& ops, int (PythonParser::*next)()) {
    int left = (this->*next)();
    while (true) {
      const BinTier* hit = nullptr;
      for (const auto& o : ops)
        if (is_punct(o.sym)) {
          hit = &o;
          break;
        }
      if (!hit) return left;
      ++p_;
      int b = mk("BinOp");
      attach(b, left);
      attach(b, mk_leaf(hit->kind, hit->sym));
      attach(b, (this->*next)());
      left = b;
    }
  }

  int parse_bitor() { return parse_bin({{"|", "BitOr"}}, &PythonParser::parse_bitxor); }
  int parse_bitxor() { return parse_bin({{"^", "BitXor"}}, &PythonParser::parse_bitand); }
  int parse_bitand() { return parse_bin({{"&", "BitAnd"}}, &PythonParser::parse_shift); }
  int parse_shift() {
    return parse_bin({{"<<", "LShift"}, {">>", "RShift"}}, &PythonParser::parse_arith);
  }
  int parse_arith() {
    return parse_bin({{"+", "Add"}, {"-", "Sub"}}, &PythonParser::parse_term);
  }
  int parse_term() {
    return parse_bin({{"*", "Mult"}, {"/", "Div"}, {"//", "FloorDiv"}, {"%", "Mod"}},
                     &PythonParser::parse_factor);
  }

  int parse_factor() {
    if (is_punct("+") || is_punct("-") || is_punct("~")) {
      std::string sym = toks_[p_++].s;
      std::string kind = sym == "+" ? "UAdd" : sym == "-" ? "USub" : "Invert";
      int u = mk("UnaryOp");
      attach(u, mk_leaf(kind, sym));
      attach(u, parse_factor());
      return u;
    }
    return parse_power();
  }

  int parse_power() {
    int base = parse_postfix();
    if (is_punct("**")) {
      ++p_;
      int b = mk("BinOp");
      attach(b, base);
      attach(b, mk_leaf("Pow", "**"));
      attach(b, parse_factor());
      return b;
    }
    return base;
  }

  int parse_postfix() {
    int e = parse_atom();
    while (true) {
      if (is_punct(".")) {
        ++p_;
        int a = mk_attr("Attribute", expect_ident());
        attach(a, e);
        e = a;
      } else if (is_punct("(")) {
        int call = mk("Call");
        attach(call, e);
        ++p_;
        while (!is_punct(")")) {
          if (at_end()) fail("unterminated call");
          if (tok().k == Tok::Ident && is_punct("=", 1)) {
            int kwn = mk_attr("keyword", toks_[p_].s);
            p_ += 2;
            attach(kwn, parse_expression());
            attach(call, kwn);
          } else if (is_punct("*") || is_punct("**")) {
            ++p_;
            attach(call, parse_expression());
          } else {
            attach(call, parse_expression());
          }
          if (is_punct(","))
            ++p_;
          else
            break;
        }
        expect_punct(")");
        e = call;
      } else if (is_punct("[")) {
        ++p_;
        int sub = mk("Subscript");
        attach(sub, e);
        attach(sub, parse_slice());
        expect_punct("]");
        e = sub;
      } else {
        break;
      }
    }
    return e;
  }

  int parse_slice() {
    // [expr] or [lower:upper(:step)] with optional parts
    int lower = -1;
    if (!is_punct(":")) lower = parse_expression();
    if (!is_punct(":")) {
      if (lower < 0) fail("empty subscript");
      return lower;
    }
    ++p_;
    int s = mk("Slice");
    if (lower >= 0) attach(s, lower);
    if (!is_punct("]") && !is_punct(":")) attach(s, parse_expression());
    if (is_punct(":")) {
      ++p_;
      if (!is_punct("]")) attach(s, parse_expression());
    }
    return s;
  }

  int parse_atom() {
    if (tok().k == Tok::Ident) return mk_leaf("Name", toks_[p_++].s, /*ident=*/true);
    if (tok().k == Tok::Num || tok().k == Tok::Str)
      return mk_attr("Constant", toks_[p_++].s);
    if (is_kw("None") || is_kw("True") || is_kw("False"))
      return mk_attr("Constant", toks_[p_++].s);
    if (is_punct("(")) {
      ++p_;
      if (is_punct(")")) {
        ++p_;
        return mk("Tuple");
      }
      int first = parse_expression();
      if (is_punct(",")) {
        int t = mk("Tuple");
        attach(t, first);
        while (is_punct(",")) {
          ++p_;
          if (is_punct(")")) break;
          attach(t, parse_expression());
        }
        expect_punct(")");
        return t;
      }
      expect_punct(")");
      return first;  // grouping
    }
    if (is_punct("[")) {
      ++p_;
      int l = mk("List");
      while (!is_punct("]")) {
        if (at_end()) fail("unterminated list");
        attach(l, parse_expression());
        if (is_punct(","))
          ++p_;
        else
          break;
      }
      expect_punct("]");
      return l;
    }
    if (is_punct("{")) {
      ++p_;
      int d = mk("Dict");
      bool is_set = false;
      while (!is_punct("}")) {
        if (at_end()) fail("unterminated dict");
        attach(d, parse_expression());
        if (is_punct(":")) {
          ++p_;
          attach(d, parse_expression());
        } else {
          is_set = true;
        }
        if (is_punct(","))
          ++p_;
        else
          break;
      }
      expect_punct("}");
      if (is_set) ast_.node(d).kind = "Set";
      return d;
    }
    fail("expected expression");
  }
};

}  // namespace

ExtendedAst parse_python(const std::string& code) { return PythonParser(code).run(); }

}  // namespace gypsum
