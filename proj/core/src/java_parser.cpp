#include <cctype>
#include <cstring>
#include <string>
#include <unordered_set>
#include <vector>

#include "gypsum/ast.hpp"
#include "gypsum/errors.hpp"
#include "gypsum/frontend.hpp"

namespace gypsum {

namespace {

const std::unordered_set<std::string> kKeywords = {
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char",
    "class", "const", "continue", "default", "do", "double", "else", "enum",
    "extends", "final", "finally", "float", "for", "goto", "if", "implements",
    "import", "instanceof", "int", "interface", "long", "native", "new",
    "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "try", "void", "volatile", "while"};

const std::unordered_set<std::string> kModifiers = {
    "public", "private", "protected", "static", "final", "abstract", "native",
    "synchronized", "transient", "volatile", "strictfp", "default"};

const std::unordered_set<std::string> kBasicTypes = {
    "void", "int", "boolean", "char", "long", "double", "float", "short", "byte"};

const char* kMultiOps[] = {">>>=", ">>>", ">>=", "<<=", "...", "->", "::", "++",
                           "--",   "&&",  "||",  "==",  "!=",  "<=", ">=", "+=",
                           "-=",   "*=",  "/=",  "%=",  "&=",  "|=", "^=", "<<",
                           ">>"};

struct Tok {
  enum K { Ident, Kw, Num, Str, Chr, Punct, End } k = End;
  std::string s;
  int line = 0, col = 0;
};

class JavaLexer {
 public:
  explicit JavaLexer(const std::string& src) : src_(src) {}

  std::vector<Tok> run() {
    std::vector<Tok> out;
    while (true) {
      skip_ws_and_comments();
      if (i_ >= src_.size()) break;
      out.push_back(next_token());
    }
    out.push_back({Tok::End, "", line_, col_});
    return out;
  }

 private:
  const std::string& src_;
  size_t i_ = 0;
  int line_ = 1, col_ = 1;

  char cur() const { return src_[i_]; }
  char at(size_t k) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }
  void adv() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_ws_and_comments() {
    while (i_ < src_.size()) {
      char c = cur();
      if (std::isspace(static_cast<unsigned char>(c))) {
        adv();
      } else if (c == '/' && at(1) == '/') {
        while (i_ < src_.size() && cur() != '\n') adv();
      } else if (c == '/' && at(1) == '*') {
        adv();
        adv();
        while (i_ < src_.size() && !(cur() == '*' && at(1) == '/')) adv();
        if (i_ + 1 >= src_.size()) throw ParseError("unterminated comment", line_, col_);
        adv();
        adv();
      } else {
        break;
      }
    }
  }

  Tok next_token() {
    int line = line_, col = col_;
    char c = cur();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::string s;
      while (i_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_' ||
              cur() == '$')) {
        s += cur();
        adv();
      }
      return {kKeywords.count(s) ? Tok::Kw : Tok::Ident, s, line, col};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(at(1))))) {
      std::string s;
      bool hex = c == '0' && (at(1) == 'x' || at(1) == 'X');
      auto num_char = [&](char ch) {
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.')
          return true;
        if (hex && std::isxdigit(static_cast<unsigned char>(ch))) return true;
        char lo = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (lo == 'x' || lo == 'l' || lo == 'f' || lo == 'd') return true;
        if (!hex && (lo == 'e')) return true;
        if (!s.empty() &&
            std::tolower(static_cast<unsigned char>(s.back())) == 'e' &&
            (ch == '+' || ch == '-'))
          return true;
        return false;
      };
      while (i_ < src_.size() && num_char(cur())) {
        s += cur();
        adv();
      }
      return {Tok::Num, s, line, col};
    }
    if (c == '"' || c == '\'') {
      char quote = c;
      std::string s(1, c);
      adv();
      while (i_ < src_.size() && cur() != quote) {
        if (cur() == '\\') {
          s += cur();
          adv();
          if (i_ >= src_.size()) break;
        }
        if (cur() == '\n') throw ParseError("unterminated literal", line, col);
        s += cur();
        adv();
      }
      if (i_ >= src_.size()) throw ParseError("unterminated literal", line, col);
      s += quote;
      adv();
      return {quote == '"' ? Tok::Str : Tok::Chr, s, line, col};
    }
    for (const char* op : kMultiOps) {
      size_t n = std::strlen(op);
      if (src_.compare(i_, n, op) == 0) {
        for (size_t k = 0; k < n; ++k) adv();
        return {Tok::Punct, op, line, col};
      }
    }
    adv();
    return {Tok::Punct, std::string(1, c), line, col};
  }
};

// Raised inside speculative parses; the caller restores the snapshot.
struct TrialFail {};

class JavaParser {
 public:
  explicit JavaParser(const std::string& code) : toks_(JavaLexer(code).run()) {}

  ExtendedAst run() {
    std::vector<int> members;
    while (!at_end()) members.push_back(parse_member_or_statement(/*in_class=*/false));
    if (members.empty()) throw ParseError("empty input", 1, 1);
    if (members.size() == 1) {
      ast_.root = members[0];
    } else {
      int root = mk("CompilationUnit");
      for (int m : members) attach(root, m);
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
  bool trial_ = false;

  // ---- token helpers ----
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
    if (trial_) throw TrialFail{};
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
  // Closing '>' of type arguments, splitting shift tokens when needed.
  void expect_type_close() {
    if (is_punct(">")) {
      ++p_;
    } else if (is_punct(">>")) {
      toks_[p_].s = ">";
    } else if (is_punct(">>>")) {
      toks_[p_].s = ">>";
    } else {
      fail("expected '>'");
    }
  }

  struct Snapshot {
    size_t p;
    size_t n_nodes;
  };
  Snapshot save() const { return {p_, ast_.nodes.size()}; }
  void restore(const Snapshot& s) {
    p_ = s.p;
    ast_.nodes.resize(s.n_nodes);
  }

  // ---- node helpers ----
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
  void attach(int parent, int child) {
    ast_.nodes[static_cast<size_t>(parent)].children.push_back(child);
    ast_.nodes[static_cast<size_t>(child)].parent = parent;
  }

  // ---- declarations ----

  // Annotations and modifier keywords, emitted as Modifier leaves.
  std::vector<int> parse_modifiers() {
    std::vector<int> mods;
    while (true) {
      if (is_punct("@")) {
        ++p_;
        std::string name = "@" + expect_ident();
        while (is_punct(".")) {  // qualified annotation
          ++p_;
          name += "." + expect_ident();
        }
        if (is_punct("(")) skip_balanced("(", ")");
        mods.push_back(mk_leaf("Modifier", name));
      } else if (tok().k == Tok::Kw && kModifiers.count(tok().s)) {
        mods.push_back(mk_leaf("Modifier", toks_[p_++].s));
      } else {
        break;
      }
    }
    return mods;
  }

  void skip_balanced(const char* open, const char* close) {
    expect_punct(open);
    int depth = 1;
    while (depth > 0) {
      if (at_end()) fail("unbalanced brackets");
      if (is_punct(open)) ++depth;
      if (is_punct(close)) --depth;
      ++p_;
    }
  }

  bool looks_like_type_start() const {
    return (tok().k == Tok::Kw && kBasicTypes.count(tok().s)) || tok().k == Tok::Ident;
  }

  // Lookahead (no nodes): does a member declaration with a return type start
  // here? Pattern: modifiers/annotations, optional <...>, type, Ident, '('.
  bool looks_like_method() const {
    size_t q = p_;
    auto qtok = [&](size_t off = 0) -> const Tok& {
      return q + off < toks_.size() ? toks_[q + off] : toks_.back();
    };
    auto skip_parens = [&](const char* open, const char* close) {
      int depth = 1;
      ++q;
      while (depth > 0 && qtok().k != Tok::End) {
        if (qtok().k == Tok::Punct && qtok().s == open) ++depth;
        if (qtok().k == Tok::Punct && qtok().s == close) --depth;
        ++q;
      }
    };
    while (true) {
      if (qtok().k == Tok::Punct && qtok().s == "@") {
        ++q;
        if (qtok().k != Tok::Ident) return false;
        ++q;
        while (qtok().k == Tok::Punct && qtok().s == "." ) {
          ++q;
          if (qtok().k != Tok::Ident) return false;
          ++q;
        }
        if (qtok().k == Tok::Punct && qtok().s == "(") skip_parens("(", ")");
      } else if (qtok().k == Tok::Kw && kModifiers.count(qtok().s)) {
        ++q;
      } else {
        break;
      }
    }
    if (qtok().k == Tok::Punct && qtok().s == "<") skip_parens("<", ">");
    // return type
    if (qtok().k == Tok::Kw && kBasicTypes.count(qtok().s)) {
      ++q;
    } else if (qtok().k == Tok::Ident) {
      ++q;
      while (qtok().k == Tok::Punct && qtok().s == ".") {
        ++q;
        if (qtok().k != Tok::Ident) return false;
        ++q;
      }
      if (qtok().k == Tok::Punct && qtok().s == "<") skip_parens("<", ">");
    } else {
      return false;
    }
    while (qtok().k == Tok::Punct && qtok().s == "[" && qtok(1).k == Tok::Punct &&
           qtok(1).s == "]")
      q += 2;
    if (qtok().k != Tok::Ident) return false;
    ++q;
    return qtok().k == Tok::Punct && qtok().s == "(";
  }

  int parse_member_or_statement(bool in_class) {
    if (looks_like_method()) return parse_method();
    // class declaration, possibly after modifiers
    {
      size_t q = p_;
      while (q < toks_.size() && toks_[q].k == Tok::Kw && kModifiers.count(toks_[q].s)) ++q;
      if (q < toks_.size() && toks_[q].k == Tok::Kw &&
          (toks_[q].s == "class" || toks_[q].s == "interface" || toks_[q].s == "enum"))
        return parse_class();
    }
    if (in_class) {
      // constructor: modifiers Ident '('
      size_t q = p_;
      while (q < toks_.size() && toks_[q].k == Tok::Kw && kModifiers.count(toks_[q].s)) ++q;
      if (q + 1 < toks_.size() && toks_[q].k == Tok::Ident &&
          toks_[q + 1].k == Tok::Punct && toks_[q + 1].s == "(")
        return parse_method(/*constructor=*/true);
      // field: modifiers type declarators ';'
      return parse_field();
    }
    return parse_statement();
  }

  int parse_class() {
    int cls = mk("ClassDeclaration");
    for (int m : parse_modifiers()) attach(cls, m);
    if (is_kw("class") || is_kw("interface") || is_kw("enum"))
      ++p_;
    else
      fail("expected class declaration");
    attach(cls, mk_leaf("Identifier", expect_ident()));
    if (is_punct("<")) skip_balanced("<", ">");
    if (is_kw("extends")) {
      ++p_;
      attach(cls, parse_type());
    }
    if (is_kw("implements")) {
      ++p_;
      attach(cls, parse_type());
      while (is_punct(",")) {
        ++p_;
        attach(cls, parse_type());
      }
    }
    expect_punct("{");
    while (!is_punct("}")) {
      if (at_end()) fail("unterminated class body");
      attach(cls, parse_member_or_statement(/*in_class=*/true));
    }
    ++p_;
    return cls;
  }

  int parse_field() {
    int fld = mk("FieldDeclaration");
    for (int m : parse_modifiers()) attach(fld, m);
    attach(fld, parse_type());
    attach(fld, parse_variable_declarator());
    while (is_punct(",")) {
      ++p_;
      attach(fld, parse_variable_declarator());
    }
    expect_punct(";");
    return fld;
  }

  int parse_method(bool constructor = false) {
    int m = mk(constructor ? "ConstructorDeclaration" : "MethodDeclaration");
    for (int mod : parse_modifiers()) attach(m, mod);
    if (is_punct("<")) skip_balanced("<", ">");  // type parameters
    if (!constructor) attach(m, parse_type());
    attach(m, mk_leaf("Identifier", expect_ident()));
    expect_punct("(");
    if (!is_punct(")")) {
      attach(m, parse_formal_parameter());
      while (is_punct(",")) {
        ++p_;
        attach(m, parse_formal_parameter());
      }
    }
    expect_punct(")");
    if (is_kw("throws")) {
      ++p_;
      attach(m, parse_type());
      while (is_punct(",")) {
        ++p_;
        attach(m, parse_type());
      }
    }
    if (is_punct(";")) {
      ++p_;  // abstract / interface method: no body
      return m;
    }
    expect_punct("{");
    while (!is_punct("}")) {
      if (at_end()) fail("unterminated method body");
      attach(m, parse_statement());
    }
    ++p_;
    return m;
  }

  int parse_formal_parameter() {
    int fp = mk("FormalParameter");
    if (is_kw("final")) {
      ++p_;
      attach(fp, mk_leaf("Modifier", "final"));
    }
    attach(fp, parse_type());
    if (is_punct("...")) ++p_;  // varargs
    attach(fp, mk_leaf("Identifier", expect_ident(), /*ident=*/true));
    return fp;
  }

  // ---- types ----

  int parse_type() {
    int t;
    if (tok().k == Tok::Kw && kBasicTypes.count(tok().s)) {
      t = mk_leaf("BasicType", toks_[p_++].s);
    } else if (tok().k == Tok::Ident) {
      std::string name = toks_[p_++].s;
      while (is_punct(".") && tok(1).k == Tok::Ident) {
        ++p_;
        name += "." + toks_[p_++].s;
      }
      if (is_punct("<")) {
        int rt = mk("ReferenceType");
        attach(rt, mk_leaf("Identifier", name));
        ++p_;
        if (!is_punct(">") && !is_punct(">>") && !is_punct(">>>")) {
          attach(rt, parse_type_argument());
          while (is_punct(",")) {
            ++p_;
            attach(rt, parse_type_argument());
          }
        }
        expect_type_close();
        t = rt;
      } else {
        t = mk_leaf("ReferenceType", name);
      }
    } else {
      fail("expected type");
    }
    while (is_punct("[") && is_punct("]", 1)) {
      p_ += 2;
      int arr = mk("ArrayType");
      attach(arr, t);
      attach(arr, mk_leaf("ArrayDims", "[]"));
      t = arr;
    }
    return t;
  }

  int parse_type_argument() {
    if (is_punct("?")) {
      ++p_;
      return mk_leaf("ReferenceType", "?");
    }
    return parse_type();
  }

  // ---- statements ----

  int parse_block() {
    int b = mk("BlockStatement");
    expect_punct("{");
    while (!is_punct("}")) {
      if (at_end()) fail("unterminated block");
      attach(b, parse_statement());
    }
    ++p_;
    return b;
  }

  int parse_statement() {
    if (is_punct("{")) return parse_block();
    if (is_punct(";")) {
      ++p_;
      return mk_leaf("EmptyStatement", ";");
    }
    if (is_kw("if")) return parse_if();
    if (is_kw("while")) {
      ++p_;
      int w = mk("WhileStatement");
      expect_punct("(");
      attach(w, parse_expression());
      expect_punct(")");
      attach(w, parse_statement());
      return w;
    }
    if (is_kw("do")) {
      ++p_;
      int d = mk("DoStatement");
      attach(d, parse_statement());
      expect_kw("while");
      expect_punct("(");
      attach(d, parse_expression());
      expect_punct(")");
      expect_punct(";");
      return d;
    }
    if (is_kw("for")) return parse_for();
    if (is_kw("switch")) return parse_switch();
    if (is_kw("return")) {
      ++p_;
      int r = mk("ReturnStatement");
      if (!is_punct(";")) attach(r, parse_expression());
      expect_punct(";");
      return r;
    }
    if (is_kw("break") || is_kw("continue")) {
      std::string kw = toks_[p_++].s;
      if (tok().k == Tok::Ident) ++p_;  // label, not modeled
      expect_punct(";");
      return mk_leaf(kw == "break" ? "BreakStatement" : "ContinueStatement", kw);
    }
    if (is_kw("throw")) {
      ++p_;
      int t = mk("ThrowStatement");
      attach(t, parse_expression());
      expect_punct(";");
      return t;
    }
    if (is_kw("try")) return parse_try();
    if (is_kw("synchronized")) {
      ++p_;
      int s = mk("SynchronizedStatement");
      expect_punct("(");
      attach(s, parse_expression());
      expect_punct(")");
      attach(s, parse_block());
      return s;
    }
    if (is_kw("assert")) {
      ++p_;
      int a = mk("AssertStatement");
      attach(a, parse_expression());
      if (is_punct(":")) {
        ++p_;
        attach(a, parse_expression());
      }
      expect_punct(";");
      return a;
    }
    // local variable declaration or expression statement
    if (is_kw("final") || looks_like_type_start()) {
      Snapshot snap = save();
      trial_ = true;
      try {
        int d = parse_local_var_decl();
        trial_ = false;
        return d;
      } catch (const TrialFail&) {
        trial_ = false;
        restore(snap);
      }
    }
    int st = mk("StatementExpression");
    attach(st, parse_expression());
    expect_punct(";");
    return st;
  }

  int parse_local_var_decl() {
    int d = mk("LocalVariableDeclaration");
    if (is_kw("final")) {
      ++p_;
      attach(d, mk_leaf("Modifier", "final"));
    }
    attach(d, parse_type());
    if (tok().k != Tok::Ident) fail("expected declarator name");
    // Only commit when the shape is declarator-like.
    if (!(tok(1).k == Tok::Punct &&
          (tok(1).s == "=" || tok(1).s == "," || tok(1).s == ";")))
      fail("not a variable declaration");
    attach(d, parse_variable_declarator());
    while (is_punct(",")) {
      ++p_;
      attach(d, parse_variable_declarator());
    }
    expect_punct(";");
    return d;
  }

  int parse_variable_declarator() {
    int v = mk("VariableDeclarator");
    attach(v, mk_leaf("Identifier", expect_ident(), /*ident=*/true));
    while (is_punct("[") && is_punct("]", 1)) p_ += 2;  // trailing dims, not modeled
    if (is_punct("=")) {
      ++p_;
      attach(v, mk_leaf("Operator", "="));
      if (is_punct("{"))
        attach(v, parse_array_initializer());
      else
        attach(v, parse_expression());
    }
    return v;
  }

  int parse_array_initializer() {
    int a = mk("ArrayInitializer");
    expect_punct("{");
    if (!is_punct("}")) {
      auto elem = [&] {
        if (is_punct("{"))
          attach(a, parse_array_initializer());
        else
          attach(a, parse_expression());
      };
      elem();
      while (is_punct(",")) {
        ++p_;
        if (is_punct("}")) break;  // trailing comma
        elem();
      }
    }
    expect_punct("}");
    return a;
  }

  int parse_if() {
    expect_kw("if");
    int node = mk("IfStatement");
    expect_punct("(");
    attach(node, parse_expression());
    expect_punct(")");
    attach(node, parse_statement());
    if (is_kw("else")) {
      ++p_;
      attach(node, parse_statement());
    }
    return node;
  }

  int parse_for() {
    expect_kw("for");
    expect_punct("(");
    // for-each: [final] type Ident ':' expr
    {
      Snapshot snap = save();
      trial_ = true;
      try {
        int fe = mk("ForEachStatement");
        if (is_kw("final")) {
          ++p_;
          attach(fe, mk_leaf("Modifier", "final"));
        }
        attach(fe, parse_type());
        attach(fe, mk_leaf("Identifier", expect_ident(), /*ident=*/true));
        if (!is_punct(":")) fail("not a for-each");
        ++p_;
        trial_ = false;
        attach(fe, parse_expression());
        expect_punct(")");
        attach(fe, parse_statement());
        return fe;
      } catch (const TrialFail&) {
        trial_ = false;
        restore(snap);
      }
    }
    int f = mk("ForStatement");
    if (!is_punct(";")) {
      int init = mk("ForInit");
      Snapshot snap = save();
      trial_ = true;
      try {
        int d = parse_local_var_decl();  // consumes the ';'
        trial_ = false;
        attach(init, d);
      } catch (const TrialFail&) {
        trial_ = false;
        restore(snap);
        auto stmt_expr = [&] {
          int se = mk("StatementExpression");
          attach(se, parse_expression());
          return se;
        };
        attach(init, stmt_expr());
        while (is_punct(",")) {
          ++p_;
          attach(init, stmt_expr());
        }
        expect_punct(";");
      }
      attach(f, init);
    } else {
      ++p_;
    }
    if (!is_punct(";")) attach(f, parse_expression());
    expect_punct(";");
    if (!is_punct(")")) {
      int upd = mk("ForUpdate");
      auto stmt_expr = [&] {
        int se = mk("StatementExpression");
        attach(se, parse_expression());
        return se;
      };
      attach(upd, stmt_expr());
      while (is_punct(",")) {
        ++p_;
        attach(upd, stmt_expr());
      }
      attach(f, upd);
    }
    expect_punct(")");
    attach(f, parse_statement());
    return f;
  }

  int parse_switch() {
    expect_kw("switch");
    int s = mk("SwitchStatement");
    expect_punct("(");
    attach(s, parse_expression());
    expect_punct(")");
    expect_punct("{");
    while (!is_punct("}")) {
      if (at_end()) fail("unterminated switch");
      int c = mk("SwitchStatementCase");
      if (is_kw("case")) {
        ++p_;
        attach(c, parse_expression());
      } else if (is_kw("default")) {
        ++p_;
      } else {
        fail("expected case or default");
      }
      expect_punct(":");
      while (!is_kw("case") && !is_kw("default") && !is_punct("}")) {
        if (at_end()) fail("unterminated switch");
        attach(c, parse_statement());
      }
      attach(s, c);
    }
    ++p_;
    return s;
  }

  int parse_try() {
    expect_kw("try");
    int t = mk("TryStatement");
    if (is_punct("(")) {  // try-with-resources
      ++p_;
      int res = mk("TryResource");
      Snapshot snap = save();
      trial_ = true;
      try {
        int d = mk("LocalVariableDeclaration");
        attach(d, parse_type());
        attach(d, parse_variable_declarator());
        trial_ = false;
        attach(res, d);
      } catch (const TrialFail&) {
        trial_ = false;
        restore(snap);
        attach(res, parse_expression());
      }
      while (is_punct(";")) {
        ++p_;
        if (is_punct(")")) break;
        attach(res, parse_expression());
      }
      expect_punct(")");
      attach(t, res);
    }
    attach(t, parse_block());
    while (is_kw("catch")) {
      ++p_;
      int c = mk("CatchClause");
      expect_punct("(");
      attach(c, parse_type());
      while (is_punct("|")) {
        ++p_;
        attach(c, parse_type());
      }
      attach(c, mk_leaf("Identifier", expect_ident(), /*ident=*/true));
      expect_punct(")");
      attach(c, parse_block());
      attach(t, c);
    }
    if (is_kw("finally")) {
      ++p_;
      int fb = mk("FinallyBlock");
      expect_punct("{");
      while (!is_punct("}")) {
        if (at_end()) fail("unterminated finally block");
        attach(fb, parse_statement());
      }
      ++p_;
      attach(t, fb);
    }
    return t;
  }

  // ---- expressions (precedence climbing) ----

  int parse_expression() { return parse_assignment(); }

  int parse_assignment() {
    int lhs = parse_ternary();
    static const std::unordered_set<std::string> kAssignOps = {
        "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="};
    if (tok().k == Tok::Punct && kAssignOps.count(tok().s)) {
      std::string op = toks_[p_++].s;
      int node = mk("Assignment");
      attach(node, lhs);
      attach(node, mk_leaf("Operator", op));
      attach(node, parse_assignment());  // right-associative
      return node;
    }
    return lhs;
  }

  int parse_ternary() {
    int cond = parse_binary(0);
    if (is_punct("?")) {
      ++p_;
      int t = mk("TernaryExpression");
      attach(t, cond);
      attach(t, parse_expression());
      expect_punct(":");
      attach(t, parse_expression());
      return t;
    }
    return cond;
  }

  // Binary operator precedence tiers, loosest first.
  static const std::vector<std::vector<std::string>>& binary_tiers() {
    static const std::vector<std::vector<std::string>> tiers = {
        {"||"},
        {"&&"},
        {"|"},
        {"^"},
        {"&"},
        {"==", "!="},
        {"<", ">", "<=", ">=", "instanceof"},
        {"<<", ">>", ">>>"},
        {"+", "-"},
        {"*", "/", "%"},
    };
    return tiers;
  }

  bool tier_match(int tier) const {
    for (const auto& op : binary_tiers()[static_cast<size_t>(tier)]) {
      if (op == "instanceof") {
        if (is_kw("instanceof")) return true;
      } else if (tok().k == Tok::Punct && tok().s == op) {
        return true;
      }
    }
    return false;
  }

  int parse_binary(int tier) {
    if (tier >= static_cast<int>(binary_tiers().size())) return parse_unary();
    int left = parse_binary(tier + 1);
    while (tier_match(tier)) {
      std::string op = toks_[p_++].s;
      int node = mk("BinaryOperation");
      attach(node, left);
      attach(node, mk_leaf("Operator", op));
      if (op == "instanceof")
        attach(node, parse_type());
      else
        attach(node, parse_binary(tier + 1));
      left = node;
    }
    return left;
  }

  int parse_unary() {
    if (is_punct("!") || is_punct("~") || is_punct("+") || is_punct("-") ||
        is_punct("++") || is_punct("--")) {
      std::string op = toks_[p_++].s;
      int u = mk("UnaryOperation");
      attach(u, mk_leaf("Operator", op));
      attach(u, parse_unary());
      return u;
    }
    if (is_punct("(")) {
      // cast: '(' type ')' followed by a unary-operand start
      Snapshot snap = save();
      trial_ = true;
      try {
        ++p_;
        int c = mk("Cast");
        attach(c, parse_type());
        if (!is_punct(")")) fail("not a cast");
        ++p_;
        bool operand_start =
            tok().k == Tok::Ident || tok().k == Tok::Num || tok().k == Tok::Str ||
            tok().k == Tok::Chr || is_punct("(") || is_punct("!") || is_punct("~") ||
            is_kw("this") || is_kw("super") || is_kw("new") ||
            (tok().k == Tok::Kw && kBasicTypes.count(tok().s));
        if (!operand_start) fail("not a cast");
        trial_ = false;
        attach(c, parse_unary());
        return c;
      } catch (const TrialFail&) {
        trial_ = false;
        restore(snap);
      }
    }
    return parse_postfix();
  }

  int parse_postfix() {
    int e = parse_primary();
    while (true) {
      if (is_punct(".")) {
        ++p_;
        std::string name = expect_ident();
        if (is_punct("(")) {
          int call = mk("MethodInvocation");
          attach(call, e);
          attach(call, mk_leaf("Identifier", name));
          parse_arguments(call);
          e = call;
        } else {
          int mr = mk("MemberReference");
          attach(mr, e);
          attach(mr, mk_leaf("Identifier", name, /*ident=*/true));
          e = mr;
        }
      } else if (is_punct("[")) {
        ++p_;
        int sel = mk("ArraySelector");
        attach(sel, e);
        attach(sel, parse_expression());
        expect_punct("]");
        e = sel;
      } else if (is_punct("++") || is_punct("--")) {
        std::string op = toks_[p_++].s;
        int u = mk("UnaryOperation");
        attach(u, e);
        attach(u, mk_leaf("Operator", op));
        e = u;
      } else {
        break;
      }
    }
    return e;
  }

  void parse_arguments(int call) {
    expect_punct("(");
    if (!is_punct(")")) {
      attach(call, parse_expression());
      while (is_punct(",")) {
        ++p_;
        attach(call, parse_expression());
      }
    }
    expect_punct(")");
  }

  int parse_primary() {
    if (tok().k == Tok::Num) return mk_leaf("Literal", toks_[p_++].s);
    if (tok().k == Tok::Str || tok().k == Tok::Chr) return mk_leaf("Literal", toks_[p_++].s);
    if (tok().k == Tok::Ident &&
        (tok().s == "true" || tok().s == "false" || tok().s == "null"))
      return mk_leaf("Literal", toks_[p_++].s);
    if (is_kw("this")) {
      ++p_;
      int self = mk_leaf("This", "this");
      if (is_punct("(")) {  // this(...) constructor call
        int call = mk("MethodInvocation");
        attach(call, self);
        parse_arguments(call);
        return call;
      }
      return self;
    }
    if (is_kw("super")) {
      ++p_;
      int sup = mk_leaf("Super", "super");
      if (is_punct("(")) {
        int call = mk("MethodInvocation");
        attach(call, sup);
        parse_arguments(call);
        return call;
      }
      return sup;
    }
    if (is_kw("new")) return parse_creator();
    if (is_punct("(")) {
      ++p_;
      int e = parse_expression();
      expect_punct(")");
      return e;  // grouping: no node
    }
    if (tok().k == Tok::Ident) {
      std::string name = toks_[p_++].s;
      if (is_punct("(")) {
        int call = mk("MethodInvocation");
        attach(call, mk_leaf("Identifier", name));
        parse_arguments(call);
        return call;
      }
      return mk_leaf("MemberReference", name, /*ident=*/true);
    }
    if (tok().k == Tok::Kw && kBasicTypes.count(tok().s)) {
      // e.g. int.class — parse the type as a leaf, allow .class postfix
      return mk_leaf("BasicType", toks_[p_++].s);
    }
    fail("expected expression");
  }

  int parse_creator() {
    expect_kw("new");
    // new Type[dims] or new Type(args) [{ anonymous body }]
    Snapshot snap = save();
    trial_ = true;
    int type_node = -1;
    try {
      type_node = parse_type();
      trial_ = false;
    } catch (const TrialFail&) {
      trial_ = false;
      restore(snap);
      fail("expected type after new");
    }
    if (is_punct("[")) {
      int ac = mk("ArrayCreator");
      attach(ac, type_node);
      while (is_punct("[")) {
        ++p_;
        if (!is_punct("]")) attach(ac, parse_expression());
        expect_punct("]");
      }
      if (is_punct("{")) attach(ac, parse_array_initializer());
      return ac;
    }
    int cc = mk("ClassCreator");
    attach(cc, type_node);
    parse_arguments(cc);
    if (is_punct("{")) {  // anonymous class body
      ++p_;
      while (!is_punct("}")) {
        if (at_end()) fail("unterminated anonymous class body");
        attach(cc, parse_member_or_statement(/*in_class=*/true));
      }
      ++p_;
    }
    return cc;
  }
};

}  // namespace

ExtendedAst parse_java(const std::string& code) { return JavaParser(code).run(); }

}  // namespace gypsum
