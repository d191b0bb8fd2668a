#pragma once

#include <optional>
#include <string>
#include <vector>

namespace clonecheck {

struct SourcePos {
  int line = 0;
  int column = 0;
};

enum class CommandKind {
  Assign,       // x := y
  AssignNull,   // x := null
  GetField,     // x := y.f
  PutField,     // x.f := y
  New,          // x := new C
  CopyCall,     // x := call C::m[X](y)
  UnknownCall,  // x := unknown(y)
  Return,       // return x
  Seq,
  If,
  While,
};

/// One command of a copy-method body.
///
/// Atomic commands use the string slots; compound commands keep their
/// sub-commands in `children`: a `Seq` holds its statements in order, an
/// `If` holds exactly two `Seq` blocks (then, else) and a `While` holds
/// one `Seq` block. `point` is a per-method pre-order index assigned by
/// resolution and is -1 in raw parser output.
struct Command {
  CommandKind kind = CommandKind::Seq;
  std::string target;      // x
  std::string source;      // y
  std::string field;       // f
  std::string class_name;  // C in `new C` and `call C::m[X](y)`
  std::string method;      // m in `call`
  std::string policy;      // X in `call`
  std::vector<Command> children;
  SourcePos pos;
  int point = -1;

  bool is_atomic() const {
    return kind != CommandKind::Seq && kind != CommandKind::If &&
           kind != CommandKind::While;
  }
};

/// Structural equality: ignores source positions and program points.
inline bool same_structure(const Command& a, const Command& b) {
  if (a.kind != b.kind || a.target != b.target || a.source != b.source ||
      a.field != b.field || a.class_name != b.class_name ||
      a.method != b.method || a.policy != b.policy ||
      a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!same_structure(a.children[i], b.children[i])) return false;
  return true;
}

inline Command make_seq(std::vector<Command> stmts) {
  Command c;
  c.kind = CommandKind::Seq;
  c.children = std::move(stmts);
  return c;
}

struct PolicyEntrySyntax {
  std::string policy;  // possibly unqualified
  std::string field;
  bool operator==(const PolicyEntrySyntax&) const = default;
};

struct PolicySyntax {
  std::string name;
  std::vector<PolicyEntrySyntax> entries;
  SourcePos pos;
};

struct MethodSyntax {
  std::string policy;  // possibly unqualified
  std::string name;
  std::string param;
  Command body;  // always a Seq
  SourcePos pos;
};

struct ClassSyntax {
  std::string name;
  std::optional<std::string> super_name;
  std::vector<std::string> fields;
  std::vector<PolicySyntax> policies;
  std::vector<MethodSyntax> methods;
  SourcePos pos;
};

struct SyntaxTree {
  std::string path;
  std::vector<ClassSyntax> classes;
};

inline bool same_structure(const SyntaxTree& a, const SyntaxTree& b) {
  if (a.classes.size() != b.classes.size()) return false;
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    const auto& x = a.classes[i];
    const auto& y = b.classes[i];
    if (x.name != y.name || x.super_name != y.super_name ||
        x.fields != y.fields || x.policies.size() != y.policies.size() ||
        x.methods.size() != y.methods.size())
      return false;
    for (std::size_t j = 0; j < x.policies.size(); ++j)
      if (x.policies[j].name != y.policies[j].name ||
          x.policies[j].entries != y.policies[j].entries)
        return false;
    for (std::size_t j = 0; j < x.methods.size(); ++j) {
      const auto& m = x.methods[j];
      const auto& n = y.methods[j];
      if (m.policy != n.policy || m.name != n.name || m.param != n.param ||
          !same_structure(m.body, n.body))
        return false;
    }
  }
  return true;
}

inline constexpr const char* kResultVar = "ret";

}  // namespace clonecheck
