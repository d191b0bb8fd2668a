#pragma once

// Concrete syntax for `.cp` files and the canonical pretty-printer.
//
//   program := class* ;
//   class   := "class" Id ("extends" Id)? "{" "fields" ":" (Id ("," Id)*)? ";"
//              policy* method* "}" ;
//   policy  := "policy" Id "{" ("deep" "(" QId ")" Id ";")* "}" ;
//   method  := "copy" "(" QId ")" Id "(" Id ")" "{" stmt* "}" ;
//   stmt    := Id ":=" rhs ";" | Id "." Id ":=" Id ";"
//            | "if" block "else" block | "while" block | "return" Id ";" ;
//   rhs     := "null" | Id | Id "." Id | "new" Id
//            | "call" QId "::" Id "[" QId "]" "(" Id ")" | "unknown" "(" Id ")" ;
//   QId     := Id ("." Id)? ;

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "clonecheck/error.hpp"
#include "clonecheck/syntax.hpp"

namespace clonecheck {

struct SourceFile {
  std::string path;
  std::string content;
};

inline SourceFile read_source_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return {path, ss.str()};
}

namespace detail {

enum class Tok { Ident, Symbol, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourcePos pos;
};

inline const std::set<std::string, std::less<>>& keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "class", "extends", "fields", "policy", "deep",   "copy",    "if",
      "else",  "while",   "return", "null",   "new",    "call",    "unknown"};
  return kw;
}

inline std::vector<Token> lex(const SourceFile& src) {
  std::vector<Token> out;
  const std::string& s = src.content;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == '\r' || c == '\n' || c == ' ' || c == '\t') {
      if (c == '\r') {
        ++i;  // CR is whitespace; LF does the line accounting
      } else {
        advance(1);
      }
      continue;
    }
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
      while (i < s.size() && s[i] != '\n') advance(1);
      continue;
    }
    SourcePos pos{line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_'))
        ++j;
      out.push_back({Tok::Ident, s.substr(i, j - i), pos});
      advance(j - i);
      continue;
    }
    if (c == ':' && i + 1 < s.size() && (s[i + 1] == '=' || s[i + 1] == ':')) {
      out.push_back({Tok::Symbol, s.substr(i, 2), pos});
      advance(2);
      continue;
    }
    if (std::string_view("{}()[];,:.").find(c) != std::string_view::npos) {
      out.push_back({Tok::Symbol, std::string(1, c), pos});
      advance(1);
      continue;
    }
    throw SyntaxError(src.path, pos,
                      std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", {line, col}});
  return out;
}

class Parser {
 public:
  explicit Parser(const SourceFile& src) : path_(src.path), toks_(lex(src)) {}

  SyntaxTree program() {
    SyntaxTree t;
    t.path = path_;
    while (peek().kind != Tok::End) t.classes.push_back(class_decl());
    return t;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw SyntaxError(path_, t.pos, msg);
  }

  static std::string describe(const Token& t) {
    return t.kind == Tok::End ? "end of file" : "'" + t.text + "'";
  }

  bool is_sym(const char* s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Symbol && peek(k).text == s;
  }
  bool is_kw(const char* s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Ident && peek(k).text == s;
  }

  Token expect_sym(const char* s) {
    if (!is_sym(s))
      fail(peek(), std::string("expected '") + s + "' but found " +
                       describe(peek()));
    return toks_[pos_++];
  }
  Token expect_kw(const char* s) {
    if (!is_kw(s))
      fail(peek(), std::string("expected '") + s + "' but found " +
                       describe(peek()));
    return toks_[pos_++];
  }

  std::string ident(const char* what) {
    const Token& t = peek();
    if (t.kind != Tok::Ident)
      fail(t, std::string("expected ") + what + " but found " + describe(t));
    if (keywords().count(t.text))
      fail(t, "reserved word '" + t.text + "' used as " + what);
    if (t.text == kResultVar)
      fail(t, "'ret' is reserved for the method result");
    ++pos_;
    return t.text;
  }

  std::string qid(const char* what) {
    std::string s = ident(what);
    if (is_sym(".")) {
      Token dot = toks_[pos_++];
      if (peek().kind != Tok::Ident)
        fail(dot, "expected identifier after '.'");
      s += "." + ident(what);
    }
    return s;
  }

  ClassSyntax class_decl() {
    ClassSyntax c;
    c.pos = expect_kw("class").pos;
    c.name = ident("class name");
    if (is_kw("extends")) {
      ++pos_;
      c.super_name = ident("superclass name");
    }
    expect_sym("{");
    expect_kw("fields");
    expect_sym(":");
    if (!is_sym(";")) {
      c.fields.push_back(ident("field name"));
      while (is_sym(",")) {
        ++pos_;
        c.fields.push_back(ident("field name"));
      }
    }
    expect_sym(";");
    while (is_kw("policy")) c.policies.push_back(policy());
    while (is_kw("copy")) c.methods.push_back(method());
    if (!is_sym("}"))
      fail(peek(), "expected 'policy', 'copy' or '}' but found " +
                       describe(peek()));
    ++pos_;
    return c;
  }

  PolicySyntax policy() {
    PolicySyntax p;
    p.pos = expect_kw("policy").pos;
    p.name = ident("policy name");
    expect_sym("{");
    while (is_kw("deep")) {
      ++pos_;
      expect_sym("(");
      PolicyEntrySyntax e;
      e.policy = qid("policy name");
      expect_sym(")");
      e.field = ident("field name");
      expect_sym(";");
      p.entries.push_back(std::move(e));
    }
    expect_sym("}");
    return p;
  }

  MethodSyntax method() {
    MethodSyntax m;
    m.pos = expect_kw("copy").pos;
    expect_sym("(");
    m.policy = qid("policy name");
    expect_sym(")");
    m.name = ident("method name");
    expect_sym("(");
    m.param = ident("parameter name");
    expect_sym(")");
    m.body = block();
    return m;
  }

  Command block() {
    SourcePos p = expect_sym("{").pos;
    std::vector<Command> stmts;
    while (!is_sym("}")) {
      if (peek().kind == Tok::End) fail(peek(), "unterminated block");
      stmts.push_back(stmt());
    }
    ++pos_;
    Command c = make_seq(std::move(stmts));
    c.pos = p;
    return c;
  }

  Command stmt() {
    Command c;
    c.pos = peek().pos;
    if (is_kw("if")) {
      ++pos_;
      c.kind = CommandKind::If;
      c.children.push_back(block());
      expect_kw("else");
      c.children.push_back(block());
      return c;
    }
    if (is_kw("while")) {
      ++pos_;
      c.kind = CommandKind::While;
      c.children.push_back(block());
      return c;
    }
    if (is_kw("return")) {
      ++pos_;
      c.kind = CommandKind::Return;
      c.source = ident("variable");
      expect_sym(";");
      return c;
    }
    std::string x = ident("variable");
    if (is_sym(".")) {
      Token dot = toks_[pos_++];
      if (peek().kind != Tok::Ident) fail(dot, "expected field name after '.'");
      c.kind = CommandKind::PutField;
      c.target = x;
      c.field = ident("field name");
      expect_sym(":=");
      c.source = ident("variable");
      expect_sym(";");
      return c;
    }
    expect_sym(":=");
    c.target = x;
    if (is_kw("null")) {
      ++pos_;
      c.kind = CommandKind::AssignNull;
    } else if (is_kw("new")) {
      ++pos_;
      c.kind = CommandKind::New;
      c.class_name = ident("class name");
    } else if (is_kw("call")) {
      ++pos_;
      c.kind = CommandKind::CopyCall;
      c.class_name = qid("class name");
      expect_sym("::");
      c.method = ident("method name");
      expect_sym("[");
      c.policy = qid("policy name");
      expect_sym("]");
      expect_sym("(");
      c.source = ident("variable");
      expect_sym(")");
    } else if (is_kw("unknown")) {
      ++pos_;
      c.kind = CommandKind::UnknownCall;
      expect_sym("(");
      c.source = ident("variable");
      expect_sym(")");
    } else {
      c.source = ident("variable");
      if (is_sym(".")) {
        Token dot = toks_[pos_++];
        if (peek().kind != Tok::Ident)
          fail(dot, "expected field name after '.'");
        c.kind = CommandKind::GetField;
        c.field = ident("field name");
      } else {
        c.kind = CommandKind::Assign;
      }
    }
    expect_sym(";");
    return c;
  }

  std::string path_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline void print_command(std::ostream& os, const Command& c, int indent);

inline void print_block(std::ostream& os, const Command& seq, int indent) {
  os << "{\n";
  for (const auto& s : seq.children) print_command(os, s, indent + 2);
  os << std::string(indent, ' ') << "}";
}

inline void print_command(std::ostream& os, const Command& c, int indent) {
  const std::string pad(indent, ' ');
  switch (c.kind) {
    case CommandKind::Assign:
      os << pad << c.target << " := " << c.source << ";\n";
      break;
    case CommandKind::AssignNull:
      os << pad << c.target << " := null;\n";
      break;
    case CommandKind::GetField:
      os << pad << c.target << " := " << c.source << "." << c.field << ";\n";
      break;
    case CommandKind::PutField:
      os << pad << c.target << "." << c.field << " := " << c.source << ";\n";
      break;
    case CommandKind::New:
      os << pad << c.target << " := new " << c.class_name << ";\n";
      break;
    case CommandKind::CopyCall:
      os << pad << c.target << " := call " << c.class_name << "::" << c.method
         << "[" << c.policy << "](" << c.source << ");\n";
      break;
    case CommandKind::UnknownCall:
      os << pad << c.target << " := unknown(" << c.source << ");\n";
      break;
    case CommandKind::Return:
      os << pad << "return " << c.source << ";\n";
      break;
    case CommandKind::Seq:
      for (const auto& s : c.children) print_command(os, s, indent);
      break;
    case CommandKind::If:
      os << pad << "if ";
      print_block(os, c.children.at(0), indent);
      os << " else ";
      print_block(os, c.children.at(1), indent);
      os << "\n";
      break;
    case CommandKind::While:
      os << pad << "while ";
      print_block(os, c.children.at(0), indent);
      os << "\n";
      break;
  }
}

}  // namespace detail

inline SyntaxTree parse_program(const SourceFile& src) {
  return detail::Parser(src).program();
}

/// One-line rendering of an atomic command, used in diagnostics and dumps.
inline std::string command_text(const Command& c) {
  if (!c.is_atomic()) {
    switch (c.kind) {
      case CommandKind::If: return "if";
      case CommandKind::While: return "while";
      default: return "seq";
    }
  }
  std::ostringstream os;
  detail::print_command(os, c, 0);
  std::string s = os.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

inline std::string pretty_print(const SyntaxTree& t) {
  std::ostringstream os;
  bool first = true;
  for (const auto& c : t.classes) {
    if (!first) os << "\n";
    first = false;
    os << "class " << c.name;
    if (c.super_name) os << " extends " << *c.super_name;
    os << " {\n  fields:";
    for (std::size_t i = 0; i < c.fields.size(); ++i)
      os << (i ? ", " : " ") << c.fields[i];
    os << ";\n";
    for (const auto& p : c.policies) {
      os << "  policy " << p.name << " {";
      if (p.entries.empty()) {
        os << "}\n";
        continue;
      }
      os << "\n";
      for (const auto& e : p.entries)
        os << "    deep(" << e.policy << ") " << e.field << ";\n";
      os << "  }\n";
    }
    for (const auto& m : c.methods) {
      os << "  copy(" << m.policy << ") " << m.name << "(" << m.param << ") ";
      detail::print_block(os, m.body, 2);
      os << "\n";
    }
    os << "}\n";
  }
  return os.str();
}

}  // namespace clonecheck
