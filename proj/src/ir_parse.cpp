#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fgml/ir.hpp"

// Recursive-descent parser for a textual LLVM-IR-style subset. The grammar is
// line-oriented: module-level constructs and instructions each occupy one
// logical line (lines are merged while brackets are unbalanced, which covers
// multi-line switch/phi). Unknown opcodes degrade to a generic instruction
// with the `lossy` flag set; unknown module-level lines are skipped.

namespace fgml::ir {

namespace {

// ---------------------------------------------------------------------------
// Tokens

enum class Tok {
  Word,     // opcodes, keywords, types, bare literals (true, null, ...)
  Local,    // %name or %"name"
  Global,   // @name or @"name"
  Number,   // 42, -3, 3.14, 1.0e+00, 0x1F
  String,   // "..." or c"..."
  Meta,     // !name, !42
  AttrRef,  // #0
  Punct,    // single char: ( ) [ ] { } < > , = * :
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int col = 0;
};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '$' ||
         c == '.' || c == '_';
}

class Lexer {
 public:
  Lexer(std::string_view text, int line) : text_(text), line_(line) { advance(); }

  const Token& peek() const { return tok_; }
  const Token& peek2() {
    if (!has_next_) {
      saved_ = tok_;
      size_t saved_pos = pos_;
      advance();
      next_ = tok_;
      tok_ = saved_;
      pos_ = saved_pos;
      has_next_ = true;
    }
    return next_;
  }

  Token take() {
    Token t = tok_;
    if (has_next_) {
      tok_ = next_;
      has_next_ = false;
      // pos_ already points past next_; re-sync by re-scanning from scratch is
      // unnecessary because advance() left pos_ past next_ when it was read.
      pos_ = next_end_;
    } else {
      advance();
    }
    return t;
  }

  bool at_end() const { return tok_.kind == Tok::End; }

  Token expect(Tok kind, const char* what) {
    if (tok_.kind != kind) fail(std::string("expected ") + what);
    return take();
  }

  void expect_punct(char c) {
    if (tok_.kind != Tok::Punct || tok_.text[0] != c)
      fail(std::string("expected '") + c + "'");
    take();
  }

  bool accept_punct(char c) {
    if (tok_.kind == Tok::Punct && tok_.text[0] == c) {
      take();
      return true;
    }
    return false;
  }

  bool accept_word(std::string_view w) {
    if (tok_.kind == Tok::Word && tok_.text == w) {
      take();
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(line_, tok_.col, msg + " (got '" + tok_.text + "')");
  }

  int line() const { return line_; }

 private:
  void advance() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    tok_ = Token{};
    tok_.col = static_cast<int>(pos_) + 1;
    if (pos_ >= text_.size()) {
      tok_.kind = Tok::End;
      tok_.text = "<eol>";
      next_end_ = pos_;
      return;
    }
    char c = text_[pos_];
    if (c == '%' || c == '@') {
      tok_.kind = c == '%' ? Tok::Local : Tok::Global;
      size_t start = pos_++;
      if (pos_ < text_.size() && text_[pos_] == '"')
        scan_quoted();
      else
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      tok_.text = std::string(text_.substr(start, pos_ - start));
      if (tok_.text.size() == 1)
        throw SyntaxError(line_, tok_.col, "empty identifier");
    } else if (c == '!') {
      size_t start = pos_++;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      tok_.kind = Tok::Meta;
      tok_.text = std::string(text_.substr(start, pos_ - start));
    } else if (c == '#') {
      size_t start = pos_++;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      tok_.kind = Tok::AttrRef;
      tok_.text = std::string(text_.substr(start, pos_ - start));
    } else if (c == '"') {
      size_t start = pos_;
      scan_quoted();
      tok_.kind = Tok::String;
      tok_.text = std::string(text_.substr(start, pos_ - start));
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+') && pos_ + 1 < text_.size() &&
                std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      size_t start = pos_++;
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.') {
          ++pos_;
        } else if ((d == '+' || d == '-') && pos_ > start &&
                   (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E' ||
                    text_[pos_ - 1] == 'p' || text_[pos_ - 1] == 'P')) {
          ++pos_;  // exponent sign
        } else {
          break;
        }
      }
      tok_.kind = Tok::Number;
      tok_.text = std::string(text_.substr(start, pos_ - start));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
               c == '$' || c == '.') {
      size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      // c"..." string constant
      if (pos_ - start == 1 && text_[start] == 'c' && pos_ < text_.size() &&
          text_[pos_] == '"') {
        scan_quoted();
        tok_.kind = Tok::String;
      } else {
        tok_.kind = Tok::Word;
      }
      tok_.text = std::string(text_.substr(start, pos_ - start));
    } else if (std::strchr("()[]{}<>,=*:;", c)) {
      tok_.kind = Tok::Punct;
      tok_.text = std::string(1, c);
      ++pos_;
    } else {
      throw SyntaxError(line_, tok_.col,
                        std::string("unexpected character '") + c + "'");
    }
    next_end_ = pos_;
  }

  void scan_quoted() {
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      ++pos_;
    }
    if (pos_ >= text_.size())
      throw SyntaxError(line_, static_cast<int>(pos_), "unterminated string");
    ++pos_;  // closing quote
  }

  std::string_view text_;
  int line_;
  size_t pos_ = 0;
  size_t next_end_ = 0;
  Token tok_;
  Token next_;
  Token saved_;
  bool has_next_ = false;
};

// ---------------------------------------------------------------------------
// Keyword tables

const std::set<std::string>& binary_opcodes() {
  static const std::set<std::string> ops = {
      "add",  "fadd", "sub",  "fsub", "mul",  "fmul", "udiv", "sdiv", "fdiv",
      "urem", "srem", "frem", "and",  "or",   "xor",  "shl",  "lshr", "ashr"};
  return ops;
}

const std::set<std::string>& cast_opcodes() {
  static const std::set<std::string> ops = {
      "trunc",  "zext",     "sext",     "fptrunc",       "fpext",
      "fptoui", "fptosi",   "uitofp",   "sitofp",        "ptrtoint",
      "inttoptr", "bitcast", "addrspacecast"};
  return ops;
}

const std::set<std::string>& skip_flags() {
  static const std::set<std::string> flags = {
      "nuw",  "nsw",      "exact",    "fast", "nnan",    "ninf",
      "nsz",  "arcp",     "contract", "afn",  "reassoc", "inbounds",
      "volatile", "inalloca", "inrange"};
  return flags;
}

const std::set<std::string>& icmp_predicates() {
  static const std::set<std::string> p = {"eq",  "ne",  "ugt", "uge", "ult",
                                          "ule", "sgt", "sge", "slt", "sle"};
  return p;
}

const std::set<std::string>& fcmp_predicates() {
  static const std::set<std::string> p = {
      "false", "oeq", "ogt", "oge", "olt", "ole", "one", "ord",
      "ueq",   "ugt", "uge", "ult", "ule", "une", "uno", "true"};
  return p;
}

const std::set<std::string>& word_literals() {
  static const std::set<std::string> w = {"true", "false",           "null",
                                          "undef", "zeroinitializer", "poison",
                                          "none"};
  return w;
}

bool is_base_type_word(const std::string& w) {
  static const std::set<std::string> base = {
      "void",  "half",     "bfloat", "float", "double", "x86_fp80",
      "fp128", "ppc_fp128", "ptr",   "label", "opaque", "metadata",
      "token"};
  if (base.count(w)) return true;
  if (w.size() >= 2 && w[0] == 'i') {
    return std::all_of(w.begin() + 1, w.end(),
                       [](char c) { return std::isdigit((unsigned char)c); });
  }
  return false;
}

bool is_linkage_private(const std::string& w) {
  return w == "internal" || w == "private";
}

const std::set<std::string>& header_keywords() {
  // linkage / visibility / cconv / attribute words tolerated before the return
  // type in define/declare and before global initializers.
  static const std::set<std::string> k = {
      "internal",  "private",     "external",    "linkonce",   "linkonce_odr",
      "weak",      "weak_odr",    "common",      "appending",  "extern_weak",
      "available_externally",     "dso_local",   "dso_preemptable",
      "hidden",    "protected",   "default",     "ccc",        "fastcc",
      "coldcc",    "spir_func",   "spir_kernel", "unnamed_addr",
      "local_unnamed_addr",       "zeroext",     "signext",    "noundef",
      "nonnull",   "noalias",     "nocapture",   "readonly",   "readnone",
      "writeonly", "inreg",       "returned",    "swiftself",  "immarg",
      "tail",      "musttail",    "notail",      "global",     "constant"};
  return k;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::string_view source, std::string path)
      : source_(source), path_(std::move(path)) {}

  IRModule parse() {
    module_.source_path = path_;
    split_lines();
    size_t i = 0;
    while (i < lines_.size()) {
      i = parse_toplevel(i);
    }
    resolve_globals();
    return std::move(module_);
  }

 private:
  struct Line {
    std::string text;
    int number = 0;
  };

  // Strip comments (';' outside quotes) and merge lines while '[' or '('
  // brackets remain open, so multi-line switch statements form one line.
  void split_lines() {
    std::vector<Line> raw;
    std::string cur;
    int line_no = 1;
    int start_line = 1;
    bool in_quote = false;
    auto flush = [&]() {
      size_t b = cur.find_first_not_of(" \t\r");
      if (b != std::string::npos) {
        size_t e = cur.find_last_not_of(" \t\r");
        raw.push_back({cur.substr(b, e - b + 1), start_line});
      }
      cur.clear();
      start_line = line_no + 1;
    };
    for (size_t i = 0; i < source_.size(); ++i) {
      char c = source_[i];
      if (c == '\n') {
        flush();
        ++line_no;
        continue;
      }
      if (in_quote) {
        if (c == '\\' && i + 1 < source_.size()) {
          cur += c;
          cur += source_[++i];
          continue;
        }
        if (c == '"') in_quote = false;
        cur += c;
      } else if (c == '"') {
        in_quote = true;
        cur += c;
      } else if (c == ';') {
        while (i + 1 < source_.size() && source_[i + 1] != '\n') ++i;
      } else {
        cur += c;
      }
    }
    flush();

    // Merge continuations: a line whose square brackets are unbalanced
    // continues on the next line.
    for (size_t i = 0; i < raw.size(); ++i) {
      Line merged = raw[i];
      while (bracket_depth(merged.text) > 0 && i + 1 < raw.size()) {
        merged.text += " ";
        merged.text += raw[++i].text;
      }
      lines_.push_back(std::move(merged));
    }
  }

  static int bracket_depth(const std::string& s) {
    int d = 0;
    bool q = false;
    for (size_t i = 0; i < s.size(); ++i) {
      char c = s[i];
      if (q) {
        if (c == '\\') ++i;
        else if (c == '"') q = false;
      } else if (c == '"') {
        q = true;
      } else if (c == '[') {
        ++d;
      } else if (c == ']') {
        --d;
      }
    }
    return d;
  }

  size_t parse_toplevel(size_t i) {
    const Line& ln = lines_[i];
    Lexer lex(ln.text, ln.number);
    Token t = lex.peek();  // copy: take() below invalidates peek references
    if (t.kind == Tok::Word && t.text == "define") return parse_define(i);
    if (t.kind == Tok::Word && t.text == "declare") {
      parse_declare(lex);
      return i + 1;
    }
    if (t.kind == Tok::Global) {
      lex.take();
      if (lex.accept_punct('=')) parse_global(lex, t.text, ln.number);
      return i + 1;
    }
    if (t.kind == Tok::Local) {
      // %name = type ...
      Lexer probe(ln.text, ln.number);
      Token name = probe.take();
      if (probe.accept_punct('=') && probe.accept_word("type")) {
        NamedType nt;
        nt.name = name.text;
        nt.definition = probe.at_end() ? "opaque" : parse_type(probe);
        module_.named_types.push_back(std::move(nt));
      }
      return i + 1;
    }
    // source_filename, target, attributes, metadata, comdat, module asm, ...
    return i + 1;
  }

  // -- types ----------------------------------------------------------------

  std::string parse_type(Lexer& lex) {
    std::string t = parse_base_type(lex);
    for (;;) {
      if (lex.peek().kind == Tok::Punct && lex.peek().text[0] == '*') {
        lex.take();
        t += "*";
      } else if (lex.peek().kind == Tok::Punct && lex.peek().text[0] == '(') {
        // function type suffix
        lex.take();
        std::string args;
        bool first = true;
        while (!lex.accept_punct(')')) {
          if (!first) {
            lex.expect_punct(',');
            args += ", ";
          }
          first = false;
          if (lex.peek().kind == Tok::Word && lex.peek().text == "...") {
            lex.take();
            args += "...";
          } else {
            args += parse_type(lex);
          }
        }
        t += " (" + args + ")";
      } else {
        break;
      }
    }
    return t;
  }

  std::string parse_base_type(Lexer& lex) {
    const Token& t = lex.peek();
    if (t.kind == Tok::Word) {
      if (t.text == "...") {
        lex.take();
        return "...";
      }
      if (is_base_type_word(t.text)) {
        return lex.take().text;
      }
      lex.fail("expected type");
    }
    if (t.kind == Tok::Local) return lex.take().text;  // named type
    if (t.kind == Tok::Punct) {
      char c = t.text[0];
      if (c == '[') {
        lex.take();
        std::string n = lex.expect(Tok::Number, "array length").text;
        if (!lex.accept_word("x")) lex.fail("expected 'x' in array type");
        std::string elem = parse_type(lex);
        lex.expect_punct(']');
        return "[" + n + " x " + elem + "]";
      }
      if (c == '{') {
        lex.take();
        std::string body;
        bool first = true;
        while (!lex.accept_punct('}')) {
          if (!first) {
            lex.expect_punct(',');
            body += ", ";
          }
          first = false;
          body += parse_type(lex);
        }
        return body.empty() ? "{}" : "{ " + body + " }";
      }
      if (c == '<') {
        lex.take();
        if (lex.peek().kind == Tok::Punct && lex.peek().text[0] == '{') {
          // packed struct <{ ... }>
          lex.take();
          std::string body;
          bool first = true;
          while (!lex.accept_punct('}')) {
            if (!first) {
              lex.expect_punct(',');
              body += ", ";
            }
            first = false;
            body += parse_type(lex);
          }
          lex.expect_punct('>');
          return "<{ " + body + " }>";
        }
        std::string n = lex.expect(Tok::Number, "vector length").text;
        if (!lex.accept_word("x")) lex.fail("expected 'x' in vector type");
        std::string elem = parse_type(lex);
        lex.expect_punct('>');
        return "<" + n + " x " + elem + ">";
      }
    }
    lex.fail("expected type");
  }

  bool peek_is_type(Lexer& lex) {
    const Token& t = lex.peek();
    if (t.kind == Tok::Word) return is_base_type_word(t.text);
    if (t.kind == Tok::Punct)
      return t.text[0] == '[' || t.text[0] == '{' || t.text[0] == '<';
    if (t.kind == Tok::Local) {
      // A named type only ever appears where a type is expected; callers
      // disambiguate. Treat leading %name as a type only on request.
      return false;
    }
    return false;
  }

  // -- values ---------------------------------------------------------------

  // Parses a value of known type into an operand. `type` may be empty for
  // best-effort contexts.
  Operand parse_value(Lexer& lex, const std::string& type) {
    const Token& t = lex.peek();
    Operand op;
    op.type_text = type;
    if (t.kind == Tok::Local) {
      op.kind = OperandKind::Variable;
      op.text = lex.take().text;
      return op;
    }
    if (t.kind == Tok::Global) {
      // Function or global data reference; fixed up in resolve_globals().
      op.kind = OperandKind::Variable;
      op.text = lex.take().text;
      return op;
    }
    if (t.kind == Tok::Meta) {
      // metadata argument of an intrinsic call
      op.kind = OperandKind::Constant;
      std::string lit = lex.take().text;
      op.text = type.empty() ? lit : type + " " + lit;
      return op;
    }
    if (t.kind == Tok::Number || t.kind == Tok::String ||
        (t.kind == Tok::Word && word_literals().count(t.text))) {
      op.kind = OperandKind::Constant;
      std::string lit = lex.take().text;
      op.text = type.empty() ? lit : type + " " + lit;
      return op;
    }
    if (t.kind == Tok::Word &&
        (t.text == "getelementptr" || cast_opcodes().count(t.text))) {
      // Constant expression: opcode (...) — consumed as opaque text.
      std::string lit = lex.take().text;
      while (lex.accept_word("inbounds")) lit += " inbounds";
      lit += " " + consume_balanced(lex, '(', ')');
      op.kind = OperandKind::Constant;
      op.text = type.empty() ? lit : type + " " + lit;
      return op;
    }
    if (t.kind == Tok::Punct &&
        (t.text[0] == '[' || t.text[0] == '{' || t.text[0] == '<')) {
      // Aggregate literal.
      char open = t.text[0];
      char close = open == '[' ? ']' : open == '{' ? '}' : '>';
      std::string lit = consume_balanced(lex, open, close);
      op.kind = OperandKind::Constant;
      op.text = type.empty() ? lit : type + " " + lit;
      return op;
    }
    lex.fail("expected value");
  }

  std::string consume_balanced(Lexer& lex, char open, char close) {
    lex.expect_punct(open);
    std::string out(1, open);
    int depth = 1;
    while (depth > 0) {
      if (lex.at_end()) lex.fail("unbalanced brackets");
      Token t = lex.take();
      if (t.kind == Tok::Punct && t.text[0] == open) ++depth;
      if (t.kind == Tok::Punct && t.text[0] == close) --depth;
      bool tight = t.kind == Tok::Punct &&
                   (t.text[0] == ',' || t.text[0] == close || t.text[0] == '*');
      if (!tight && out.size() > 1 && out.back() != open) out += " ";
      out += t.text;
    }
    return out;
  }

  void skip_param_attrs(Lexer& lex) {
    for (;;) {
      const Token& t = lex.peek();
      if (t.kind == Tok::Word &&
          (header_keywords().count(t.text) || skip_flags().count(t.text))) {
        std::string w = lex.take().text;
        // attribute with argument: byval(T), align 8, dereferenceable(8)
        if (lex.peek().kind == Tok::Punct && lex.peek().text[0] == '(')
          consume_balanced(lex, '(', ')');
      } else if (t.kind == Tok::Word && t.text == "align") {
        lex.take();
        lex.expect(Tok::Number, "alignment");
      } else {
        break;
      }
    }
  }

  // -- module-level ---------------------------------------------------------

  size_t parse_define(size_t i) {
    const Line& ln = lines_[i];
    Lexer lex(ln.text, ln.number);
    lex.take();  // define
    IRFunction fn;
    fn.is_definition = true;
    fn.line = ln.number;
    fn.is_externally_visible = true;
    while (lex.peek().kind == Tok::Word && header_keywords().count(lex.peek().text)) {
      if (is_linkage_private(lex.peek().text)) fn.is_externally_visible = false;
      lex.take();
    }
    fn.return_type = parse_type(lex);
    fn.name = lex.expect(Tok::Global, "function name").text;
    lex.expect_punct('(');
    int index = 0;
    while (!lex.accept_punct(')')) {
      if (index > 0) lex.expect_punct(',');
      if (lex.peek().kind == Tok::Word && lex.peek().text == "...") {
        lex.take();
        fn.params.emplace_back("", "...");
        ++index;
        continue;
      }
      std::string ty = parse_type(lex);
      skip_param_attrs(lex);
      std::string name;
      if (lex.peek().kind == Tok::Local)
        name = lex.take().text;
      else
        name = "%" + std::to_string(index);
      fn.params.emplace_back(name, ty);
      ++index;
    }
    // Trailing attributes, then '{' (possibly on the next line).
    bool open = false;
    while (!lex.at_end()) {
      if (lex.accept_punct('{')) {
        open = true;
        break;
      }
      lex.take();
    }
    size_t next = i + 1;
    if (!open) {
      if (next >= lines_.size() || lines_[next].text != "{")
        throw SyntaxError(ln.number, 1, "expected '{' after define");
      ++next;
    }
    next = parse_body(next, fn);
    module_.functions.push_back(std::move(fn));
    return next;
  }

  void parse_declare(Lexer& lex) {
    lex.take();  // declare
    IRFunction fn;
    fn.is_definition = false;
    fn.line = lex.line();
    while (lex.peek().kind == Tok::Word && header_keywords().count(lex.peek().text)) {
      if (is_linkage_private(lex.peek().text)) fn.is_externally_visible = false;
      lex.take();
    }
    fn.return_type = parse_type(lex);
    fn.name = lex.expect(Tok::Global, "function name").text;
    lex.expect_punct('(');
    int index = 0;
    while (!lex.accept_punct(')')) {
      if (index > 0) lex.expect_punct(',');
      if (lex.peek().kind == Tok::Word && lex.peek().text == "...") {
        lex.take();
        fn.params.emplace_back("", "...");
        ++index;
        continue;
      }
      std::string ty = parse_type(lex);
      skip_param_attrs(lex);
      std::string name;
      if (lex.peek().kind == Tok::Local) name = lex.take().text;
      fn.params.emplace_back(name, ty);
      ++index;
    }
    module_.functions.push_back(std::move(fn));
  }

  void parse_global(Lexer& lex, const std::string& name, int line) {
    GlobalConstant g;
    g.name = name;
    g.line = line;
    while (lex.peek().kind == Tok::Word && header_keywords().count(lex.peek().text)) {
      std::string w = lex.take().text;
      if (w == "constant") g.is_constant = true;
      if (w == "global") g.is_constant = false;
      if (w == "global" || w == "constant") {
        g.type_text = parse_type(lex);
        // Initializer: everything up to a trailing ", align"/metadata clause.
        std::string init;
        while (!lex.at_end()) {
          const Token& t = lex.peek();
          if (t.kind == Tok::Punct && t.text[0] == ',') {
            const Token& nx = lex.peek2();
            if ((nx.kind == Tok::Word &&
                 (nx.text == "align" || nx.text == "section" ||
                  nx.text == "comdat")) ||
                nx.kind == Tok::Meta)
              break;
          }
          if (t.kind == Tok::Meta || t.kind == Tok::AttrRef) break;
          Token taken = lex.take();
          bool tight = taken.kind == Tok::Punct &&
                       (taken.text[0] == ',' || taken.text[0] == '*');
          if (!init.empty() && !tight) init += " ";
          init += taken.text;
        }
        g.initializer = init;
        module_.globals.push_back(std::move(g));
        return;
      }
    }
    // `@x = alias ...`, `@x = ifunc ...` and other constructs: ignored.
  }

  // -- function bodies --------------------------------------------------------

  static bool is_label_line(const std::string& s, std::string* label) {
    if (s.size() < 2 || s.back() != ':') return false;
    std::string body = s.substr(0, s.size() - 1);
    if (body.empty()) return false;
    if (body.front() == '"' && body.back() == '"' && body.size() >= 2) {
      *label = body.substr(1, body.size() - 2);
      return true;
    }
    if (std::all_of(body.begin(), body.end(), is_ident_char)) {
      *label = body;
      return true;
    }
    return false;
  }

  size_t parse_body(size_t i, IRFunction& fn) {
    IRBlock* block = nullptr;
    while (i < lines_.size()) {
      const Line& ln = lines_[i];
      if (ln.text == "}") return i + 1;
      std::string label;
      if (is_label_line(ln.text, &label)) {
        fn.blocks.push_back(IRBlock{label, {}, ln.number});
        block = &fn.blocks.back();
        ++i;
        continue;
      }
      if (block == nullptr) {
        fn.blocks.push_back(IRBlock{"entry", {}, ln.number});
        block = &fn.blocks.back();
      }
      IRInstruction inst = parse_instruction(ln);
      inst.block_label = block->label;
      inst.index_in_block = static_cast<int>(block->instructions.size());
      block->instructions.push_back(std::move(inst));
      ++i;
    }
    throw SyntaxError(fn.line, 1, "unterminated function body for " + fn.name);
  }

  // -- instructions -----------------------------------------------------------

  IRInstruction parse_instruction(const Line& ln) {
    Lexer lex(ln.text, ln.number);
    IRInstruction inst;
    inst.raw_text = ln.text;
    inst.line = ln.number;

    if (lex.peek().kind == Tok::Local) {
      Token res = lex.take();
      lex.expect_punct('=');
      inst.result = res.text;
    }
    Token op = lex.expect(Tok::Word, "opcode");
    std::string opcode = op.text;
    if (opcode == "tail" || opcode == "musttail" || opcode == "notail")
      opcode = lex.expect(Tok::Word, "call").text;

    if (opcode == "ret") {
      inst.opcode = "ret";
      if (!lex.accept_word("void"))
        inst.operands.push_back(parse_value(lex, parse_type(lex)));
    } else if (opcode == "unreachable") {
      inst.opcode = "unreachable";
    } else if (opcode == "br") {
      inst.opcode = "br";
      if (lex.accept_word("label")) {
        inst.operands.push_back(parse_label(lex));
      } else {
        std::string ty = parse_type(lex);
        inst.operands.push_back(parse_value(lex, ty));
        lex.expect_punct(',');
        if (!lex.accept_word("label")) lex.fail("expected 'label'");
        inst.operands.push_back(parse_label(lex));
        lex.expect_punct(',');
        if (!lex.accept_word("label")) lex.fail("expected 'label'");
        inst.operands.push_back(parse_label(lex));
      }
    } else if (opcode == "switch") {
      inst.opcode = "switch";
      std::string ty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, ty));
      lex.expect_punct(',');
      if (!lex.accept_word("label")) lex.fail("expected 'label'");
      inst.operands.push_back(parse_label(lex));
      lex.expect_punct('[');
      while (!lex.accept_punct(']')) {
        std::string cty = parse_type(lex);
        inst.operands.push_back(parse_value(lex, cty));
        lex.expect_punct(',');
        if (!lex.accept_word("label")) lex.fail("expected 'label'");
        inst.operands.push_back(parse_label(lex));
      }
    } else if (opcode == "phi") {
      inst.opcode = "phi";
      skip_fm_flags(lex);
      std::string ty = parse_type(lex);
      inst.result_type = ty;
      bool first = true;
      for (;;) {
        if (!first) {
          // next pair only if ", [" follows; otherwise trailing metadata
          if (!(lex.peek().kind == Tok::Punct && lex.peek().text[0] == ',' &&
                lex.peek2().kind == Tok::Punct && lex.peek2().text[0] == '['))
            break;
          lex.take();
        }
        first = false;
        lex.expect_punct('[');
        inst.operands.push_back(parse_value(lex, ty));
        lex.expect_punct(',');
        Token bb = lex.expect(Tok::Local, "predecessor label");
        inst.operands.push_back(make_label(bb.text));
        lex.expect_punct(']');
      }
    } else if (opcode == "call") {
      inst.opcode = "call";
      skip_fm_flags(lex);
      while (lex.peek().kind == Tok::Word && header_keywords().count(lex.peek().text))
        lex.take();
      std::string retty = parse_type(lex);
      inst.result_type = retty;
      Operand callee;
      if (lex.peek().kind == Tok::Global) {
        callee.kind = OperandKind::FunctionRef;
        callee.text = lex.take().text;
        callee.type_text = retty;
      } else if (lex.peek().kind == Tok::Local) {
        callee.kind = OperandKind::Variable;  // indirect call
        callee.text = lex.take().text;
        callee.type_text = retty + "*";
      } else {
        lex.fail("expected callee");
      }
      inst.operands.push_back(std::move(callee));
      lex.expect_punct('(');
      bool first = true;
      while (!lex.accept_punct(')')) {
        if (!first) lex.expect_punct(',');
        first = false;
        std::string aty = parse_type(lex);
        skip_param_attrs(lex);
        inst.operands.push_back(parse_value(lex, aty));
      }
    } else if (binary_opcodes().count(opcode)) {
      inst.opcode = opcode;
      skip_fm_flags(lex);
      std::string ty = parse_type(lex);
      inst.result_type = ty;
      inst.operands.push_back(parse_value(lex, ty));
      lex.expect_punct(',');
      inst.operands.push_back(parse_value(lex, ty));
    } else if (opcode == "icmp" || opcode == "fcmp") {
      skip_fm_flags(lex);
      Token pred = lex.expect(Tok::Word, "comparison predicate");
      const auto& preds =
          opcode == "icmp" ? icmp_predicates() : fcmp_predicates();
      if (!preds.count(pred.text)) lex.fail("unknown predicate " + pred.text);
      inst.opcode = opcode + " " + pred.text;
      std::string ty = parse_type(lex);
      inst.result_type = "i1";
      inst.operands.push_back(parse_value(lex, ty));
      lex.expect_punct(',');
      inst.operands.push_back(parse_value(lex, ty));
    } else if (opcode == "load") {
      inst.opcode = "load";
      skip_fm_flags(lex);
      while (lex.accept_word("atomic")) {}
      std::string t1 = parse_type(lex);
      if (lex.accept_punct(',')) {
        std::string pty = parse_type(lex);
        inst.result_type = t1;
        inst.operands.push_back(parse_value(lex, pty));
      } else {
        // old syntax: load <ty*> <ptr>
        inst.result_type = strip_pointer(t1);
        inst.operands.push_back(parse_value(lex, t1));
      }
    } else if (opcode == "store") {
      inst.opcode = "store";
      skip_fm_flags(lex);
      while (lex.accept_word("atomic")) {}
      std::string vty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, vty));
      lex.expect_punct(',');
      std::string pty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, pty));
    } else if (opcode == "alloca") {
      inst.opcode = "alloca";
      skip_fm_flags(lex);
      std::string ty = parse_type(lex);
      inst.result_type = ty + "*";
      if (lex.peek().kind == Tok::Punct && lex.peek().text[0] == ',') {
        const Token& nx = lex.peek2();
        if (nx.kind == Tok::Word && is_base_type_word(nx.text) &&
            nx.text != "align") {
          lex.take();  // ','
          std::string cty = parse_type(lex);
          inst.operands.push_back(parse_value(lex, cty));
        }
      }
    } else if (opcode == "getelementptr") {
      // result_type records element-type* so the canonical printer can
      // recover the leading element type.
      inst.opcode = "getelementptr";
      skip_fm_flags(lex);
      std::string t1 = parse_type(lex);
      if (lex.accept_punct(',')) {
        std::string pty = parse_type(lex);
        inst.operands.push_back(parse_value(lex, pty));
        inst.result_type = t1 + "*";
      } else {
        // old syntax: getelementptr <ty*> <ptr>, indices...
        inst.operands.push_back(parse_value(lex, t1));
        inst.result_type = t1;
      }
      while (lex.peek().kind == Tok::Punct && lex.peek().text[0] == ',') {
        const Token& nx = lex.peek2();
        if (nx.kind == Tok::Word && nx.text == "align") break;
        if (nx.kind == Tok::Meta) break;
        lex.take();
        skip_fm_flags(lex);
        std::string ity = parse_type(lex);
        inst.operands.push_back(parse_value(lex, ity));
      }
    } else if (cast_opcodes().count(opcode)) {
      inst.opcode = opcode;
      skip_fm_flags(lex);
      std::string sty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, sty));
      if (!lex.accept_word("to")) lex.fail("expected 'to' in cast");
      inst.result_type = parse_type(lex);
    } else if (opcode == "select") {
      inst.opcode = "select";
      skip_fm_flags(lex);
      std::string cty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, cty));
      lex.expect_punct(',');
      std::string aty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, aty));
      lex.expect_punct(',');
      std::string bty = parse_type(lex);
      inst.operands.push_back(parse_value(lex, bty));
      inst.result_type = aty;
    } else {
      parse_generic(lex, inst, opcode);
      finish_instruction_line(lex);
      return inst;
    }
    finish_instruction_line(lex);
    return inst;
  }

  void skip_fm_flags(Lexer& lex) {
    while (lex.peek().kind == Tok::Word && skip_flags().count(lex.peek().text))
      lex.take();
  }

  Operand parse_label(Lexer& lex) {
    Token t = lex.expect(Tok::Local, "label");
    return make_label(t.text);
  }

  static Operand make_label(const std::string& local) {
    Operand op;
    op.kind = OperandKind::Label;
    std::string name = local.substr(1);
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"')
      name = name.substr(1, name.size() - 2);
    op.text = name;
    op.type_text = "label";
    return op;
  }

  static std::string strip_pointer(const std::string& t) {
    if (!t.empty() && t.back() == '*') return t.substr(0, t.size() - 1);
    return t;
  }

  static bool is_trailing_attr_word(const std::string& w) {
    static const std::set<std::string> extra = {
        "nounwind",  "readnone", "readonly",  "willreturn", "cold",
        "hot",       "builtin",  "nobuiltin", "monotonic",  "acquire",
        "release",   "acq_rel",  "seq_cst",   "unordered",  "syncscope"};
    return extra.count(w) || header_keywords().count(w);
  }

  // Trailing ", align N", metadata, attribute refs, function attributes.
  void finish_instruction_line(Lexer& lex) {
    for (;;) {
      if (lex.at_end()) return;
      const Token& t = lex.peek();
      if (t.kind == Tok::Punct && t.text[0] == ',') {
        lex.take();
        if (lex.accept_word("align")) {
          lex.expect(Tok::Number, "alignment");
          continue;
        }
        if (lex.peek().kind == Tok::Meta) {
          lex.take();
          if (lex.peek().kind == Tok::Meta) lex.take();
          continue;
        }
        lex.fail("unexpected trailing tokens");
      } else if (t.kind == Tok::Meta || t.kind == Tok::AttrRef) {
        lex.take();
      } else if (t.kind == Tok::Word && t.text == "align") {
        lex.take();
        lex.expect(Tok::Number, "alignment");
      } else if (t.kind == Tok::Word && is_trailing_attr_word(t.text)) {
        lex.take();
        if (lex.peek().kind == Tok::Punct && lex.peek().text[0] == '(')
          consume_balanced(lex, '(', ')');
      } else {
        lex.fail("unexpected trailing tokens");
      }
    }
  }

  // Unknown opcode: capture operands by splitting the remainder on top-level
  // commas. Sets the lossy flag.
  void parse_generic(Lexer& lex, IRInstruction& inst, const std::string& opcode) {
    inst.opcode = opcode;
    inst.lossy = true;
    std::vector<Token> chunk;
    int depth = 0;
    auto flush = [&]() {
      if (chunk.empty()) return;
      generic_chunk_operand(inst, chunk);
      chunk.clear();
    };
    while (!lex.at_end()) {
      Token t = lex.take();
      if (t.kind == Tok::Punct) {
        char c = t.text[0];
        if (c == '(' || c == '[' || c == '{' || c == '<') ++depth;
        if (c == ')' || c == ']' || c == '}' || c == '>') --depth;
        if (c == ',' && depth == 0) {
          flush();
          continue;
        }
      }
      chunk.push_back(std::move(t));
    }
    flush();
  }

  void generic_chunk_operand(IRInstruction& inst, const std::vector<Token>& chunk) {
    // Pattern scan: optional leading type-ish tokens, then a value token.
    for (size_t k = 0; k < chunk.size(); ++k) {
      const Token& t = chunk[k];
      if (t.kind == Tok::Word && t.text == "label" && k + 1 < chunk.size() &&
          chunk[k + 1].kind == Tok::Local) {
        inst.operands.push_back(make_label(chunk[k + 1].text));
        return;
      }
    }
    std::string type_text;
    for (size_t k = 0; k < chunk.size(); ++k) {
      const Token& t = chunk[k];
      if (t.kind == Tok::Word && is_base_type_word(t.text)) {
        type_text = t.text;
        while (k + 1 < chunk.size() && chunk[k + 1].kind == Tok::Punct &&
               chunk[k + 1].text[0] == '*') {
          type_text += "*";
          ++k;
        }
        continue;
      }
      if (t.kind == Tok::Local) {
        Operand op;
        op.kind = OperandKind::Variable;
        op.text = t.text;
        op.type_text = type_text;
        inst.operands.push_back(std::move(op));
        return;
      }
      if (t.kind == Tok::Global) {
        Operand op;
        op.kind = OperandKind::Variable;
        op.text = t.text;
        op.type_text = type_text;
        inst.operands.push_back(std::move(op));
        return;
      }
      if (t.kind == Tok::Number ||
          (t.kind == Tok::Word && word_literals().count(t.text))) {
        Operand op;
        op.kind = OperandKind::Constant;
        op.text = type_text.empty() ? t.text : type_text + " " + t.text;
        op.type_text = type_text;
        inst.operands.push_back(std::move(op));
        return;
      }
    }
    // No recognizable value in this chunk: dropped (lossy).
  }

  // Fix up `@name` operands now that the function and global tables exist.
  void resolve_globals() {
    std::set<std::string> unresolved;
    for (auto& fn : module_.functions) {
      for (auto& bb : fn.blocks) {
        for (auto& inst : bb.instructions) {
          for (auto& op : inst.operands) {
            if (op.kind == OperandKind::FunctionRef) {
              if (!module_.find_function(op.text)) unresolved.insert(op.text);
              continue;
            }
            if (op.kind == OperandKind::Variable && !op.text.empty() &&
                op.text[0] == '@') {
              if (module_.find_function(op.text)) {
                op.kind = OperandKind::FunctionRef;
              } else if (const auto* g = module_.find_global(op.text)) {
                if (g->is_constant) {
                  op.kind = OperandKind::Constant;
                  op.text = op.type_text.empty()
                                ? op.text
                                : op.type_text + " " + op.text;
                }
                // plain globals stay Variable
              }
              // unknown @name: external data, stays Variable
            }
          }
        }
      }
    }
    module_.unresolved_callees.assign(unresolved.begin(), unresolved.end());
  }

  std::string_view source_;
  std::string path_;
  IRModule module_;
  std::vector<Line> lines_;
};

}  // namespace

IRModule parse_raw(std::string_view source, const std::string& path) {
  Parser p(source, path);
  return p.parse();
}

}  // namespace fgml::ir
