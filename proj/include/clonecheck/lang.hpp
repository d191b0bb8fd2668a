#pragma once

// Program model and name resolution for the copy-policy language.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "clonecheck/error.hpp"
#include "clonecheck/syntax.hpp"

namespace clonecheck {

/// Qualified policy identifier, `Class.Name`.
using PolicyId = std::string;

/// A named copy policy: the deep fields and the policy governing each.
/// Every field not present in `deep` is shallow.
struct Policy {
  PolicyId id;
  std::string owner;
  std::map<std::string, PolicyId> deep;  // field -> governing policy

  std::set<std::pair<PolicyId, std::string>> entries() const {
    std::set<std::pair<PolicyId, std::string>> out;
    for (const auto& [f, x] : deep) out.emplace(x, f);
    return out;
  }
};

struct MethodDecl {
  std::string owner;
  PolicyId policy;
  std::string name;
  std::string param;
  Command body;
  std::set<std::string> local_vars;  // body variables, param and `ret`
  SourcePos pos;
};

struct ClassDecl {
  std::string name;
  std::optional<std::string> super_name;
  std::vector<std::string> declared_fields;
  std::vector<std::string> fields;  // inherited first, then declared
  std::map<std::string, PolicyId> policies;  // local name -> id
  std::map<std::string, MethodDecl> methods;  // declared here only
  SourcePos pos;

  bool has_field(const std::string& f) const {
    return std::find(fields.begin(), fields.end(), f) != fields.end();
  }
};

/// A resolved program. Immutable once built by `resolve_program`.
class Program {
 public:
  const std::string& path() const { return path_; }
  const std::vector<ClassDecl>& classes() const { return classes_; }
  const std::map<PolicyId, Policy>& policies() const { return policies_; }

  const ClassDecl* find_class(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &classes_[it->second];
  }

  const ClassDecl& cls(const std::string& name) const {
    const ClassDecl* c = find_class(name);
    if (!c) throw std::out_of_range("unknown class " + name);
    return *c;
  }

  const Policy& policy(const PolicyId& id) const {
    auto it = policies_.find(id);
    if (it == policies_.end()) throw std::out_of_range("unknown policy " + id);
    return it->second;
  }

  /// a ⪯ b: reflexive transitive closure of `extends`.
  bool subclass_of(const std::string& a, const std::string& b) const {
    for (const ClassDecl* c = find_class(a); c;
         c = c->super_name ? find_class(*c->super_name) : nullptr)
      if (c->name == b) return true;
    return false;
  }

  /// Bottom-up scan of the hierarchy starting at `cn`.
  const MethodDecl* find_method(const std::string& cn,
                                const std::string& m) const {
    for (const ClassDecl* c = find_class(cn); c;
         c = c->super_name ? find_class(*c->super_name) : nullptr) {
      auto it = c->methods.find(m);
      if (it != c->methods.end()) return &it->second;
    }
    return nullptr;
  }

  const MethodDecl& lookup(const std::string& cn, const std::string& m) const {
    const MethodDecl* md = find_method(cn, m);
    if (!md) throw MethodNotFound(cn, m);
    return *md;
  }

  std::vector<std::string> subclasses_of(const std::string& cn) const {
    std::vector<std::string> out;
    for (const auto& c : classes_)
      if (subclass_of(c.name, cn)) out.push_back(c.name);
    return out;
  }

  std::set<std::string> all_fields() const {
    std::set<std::string> out;
    for (const auto& c : classes_)
      out.insert(c.declared_fields.begin(), c.declared_fields.end());
    return out;
  }

 private:
  friend Program resolve_program(const SyntaxTree& tree);

  std::string path_;
  std::vector<ClassDecl> classes_;
  std::map<std::string, std::size_t> index_;
  std::map<PolicyId, Policy> policies_;
};

inline bool subclass_of(const Program& p, const std::string& a,
                        const std::string& b) {
  return p.subclass_of(a, b);
}

inline const MethodDecl& lookup(const Program& p, const std::string& cn,
                                const std::string& m) {
  return p.lookup(cn, m);
}

inline bool policy_included(const Policy& smaller, const Policy& larger) {
  auto a = smaller.entries();
  auto b = larger.entries();
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

namespace detail {

inline void collect_vars(const Command& c, std::set<std::string>& out) {
  for (const auto* s : {&c.target, &c.source})
    if (!s->empty()) out.insert(*s);
  for (const auto& ch : c.children) collect_vars(ch, out);
}

inline void number_points(Command& c, int& next) {
  c.point = next++;
  for (auto& ch : c.children) number_points(ch, next);
}

}  // namespace detail

/// Resolves names, materializes inherited fields and builds the policy map.
/// Throws ResolveError.
inline Program resolve_program(const SyntaxTree& tree) {
  Program prog;
  prog.path_ = tree.path;
  const std::string& path = tree.path;

  std::map<std::string, const ClassSyntax*> syn;
  for (const auto& c : tree.classes) {
    if (!syn.emplace(c.name, &c).second)
      throw ResolveError(ResolveErrorKind::DuplicateClass, path, c.pos,
                         "class " + c.name + " declared twice");
  }
  for (const auto& c : tree.classes) {
    if (c.super_name && !syn.count(*c.super_name))
      throw ResolveError(ResolveErrorKind::UnknownClass, path, c.pos,
                         "unknown superclass " + *c.super_name);
  }
  for (const auto& c : tree.classes) {
    std::set<std::string> seen;
    for (const ClassSyntax* k = &c; k;
         k = k->super_name ? syn.at(*k->super_name) : nullptr) {
      if (!seen.insert(k->name).second)
        throw ResolveError(ResolveErrorKind::CyclicExtends, path, c.pos,
                           "class " + c.name + " extends itself");
    }
  }

  // Classes keep declaration order; layouts need the ancestors first.
  for (const auto& c : tree.classes) {
    ClassDecl d;
    d.name = c.name;
    d.super_name = c.super_name;
    d.declared_fields = c.fields;
    d.pos = c.pos;
    prog.index_[c.name] = prog.classes_.size();
    prog.classes_.push_back(std::move(d));
  }
  std::set<std::string> laid_out;
  std::function<void(ClassDecl&)> layout = [&](ClassDecl& d) {
    if (!laid_out.insert(d.name).second) return;
    std::vector<std::string> inherited;
    if (d.super_name) {
      ClassDecl& s = prog.classes_[prog.index_.at(*d.super_name)];
      layout(s);
      inherited = s.fields;
    }
    std::set<std::string> seen(inherited.begin(), inherited.end());
    d.fields = inherited;
    for (const auto& f : d.declared_fields) {
      if (!seen.insert(f).second)
        throw ResolveError(ResolveErrorKind::DuplicateField, path, d.pos,
                           "field " + f + " of class " + d.name +
                               " is already declared or inherited");
      d.fields.push_back(f);
    }
  };
  for (auto& d : prog.classes_) layout(d);

  for (const auto& c : tree.classes) {
    ClassDecl& d = prog.classes_[prog.index_.at(c.name)];
    for (const auto& pol : c.policies) {
      PolicyId id = c.name + "." + pol.name;
      if (!d.policies.emplace(pol.name, id).second)
        throw ResolveError(ResolveErrorKind::DuplicatePolicy, path, pol.pos,
                           "policy " + id + " declared twice");
      Policy p;
      p.id = id;
      p.owner = c.name;
      prog.policies_.emplace(id, std::move(p));
    }
  }

  auto resolve_policy = [&](const std::string& ref, const std::string& cls,
                            SourcePos pos) -> PolicyId {
    std::string start = cls;
    std::string name = ref;
    if (auto dot = ref.find('.'); dot != std::string::npos) {
      start = ref.substr(0, dot);
      name = ref.substr(dot + 1);
      if (!prog.find_class(start))
        throw ResolveError(ResolveErrorKind::UnknownClass, path, pos,
                           "unknown class in policy " + ref);
    }
    for (const ClassDecl* k = prog.find_class(start); k;
         k = k->super_name ? prog.find_class(*k->super_name) : nullptr) {
      auto it = k->policies.find(name);
      if (it != k->policies.end()) return it->second;
    }
    throw ResolveError(ResolveErrorKind::UnknownPolicy, path, pos,
                       "unknown policy " + ref + " from class " + cls);
  };

  for (const auto& c : tree.classes) {
    const ClassDecl& d = prog.cls(c.name);
    for (const auto& pol : c.policies) {
      Policy& p = prog.policies_.at(c.name + "." + pol.name);
      for (const auto& e : pol.entries) {
        if (!d.has_field(e.field))
          throw ResolveError(ResolveErrorKind::UnknownField, path, pol.pos,
                             "policy " + p.id + " names field " + e.field +
                                 " which class " + c.name + " does not have");
        PolicyId target = resolve_policy(e.policy, c.name, pol.pos);
        if (!p.deep.emplace(e.field, target).second)
          throw ResolveError(ResolveErrorKind::InvalidPolicy, path, pol.pos,
                             "policy " + p.id + " lists field " + e.field +
                                 " twice");
      }
    }
  }

  // Method headers first so that call sites can look up any class.
  for (const auto& c : tree.classes) {
    ClassDecl& d = prog.classes_[prog.index_.at(c.name)];
    for (const auto& m : c.methods) {
      MethodDecl md;
      md.owner = c.name;
      md.policy = resolve_policy(m.policy, c.name, m.pos);
      md.name = m.name;
      md.param = m.param;
      md.body = m.body;
      md.pos = m.pos;
      if (!d.methods.emplace(m.name, std::move(md)).second)
        throw ResolveError(ResolveErrorKind::DuplicateMethod, path, m.pos,
                           "method " + m.name + " declared twice in " +
                               c.name);
    }
  }

  const std::set<std::string> known_fields = prog.all_fields();
  std::function<void(Command&)> resolve_cmd = [&](Command& cmd) {
    switch (cmd.kind) {
      case CommandKind::GetField:
      case CommandKind::PutField:
        if (!known_fields.count(cmd.field))
          throw ResolveError(ResolveErrorKind::UnknownField, path, cmd.pos,
                             "no class declares field " + cmd.field);
        break;
      case CommandKind::New:
        if (!prog.find_class(cmd.class_name))
          throw ResolveError(ResolveErrorKind::UnknownClass, path, cmd.pos,
                             "unknown class " + cmd.class_name);
        break;
      case CommandKind::CopyCall: {
        if (!prog.find_class(cmd.class_name))
          throw ResolveError(ResolveErrorKind::UnknownClass, path, cmd.pos,
                             "unknown class " + cmd.class_name);
        const MethodDecl* callee = prog.find_method(cmd.class_name, cmd.method);
        if (!callee)
          throw ResolveError(ResolveErrorKind::UnknownMethod, path, cmd.pos,
                             "class " + cmd.class_name + " has no method " +
                                 cmd.method);
        cmd.policy = resolve_policy(cmd.policy, cmd.class_name, cmd.pos);
        if (!policy_included(prog.policy(cmd.policy),
                             prog.policy(callee->policy)))
          throw ResolveError(ResolveErrorKind::CallPolicyMismatch, path,
                             cmd.pos,
                             "policy " + cmd.policy + " is not included in " +
                                 callee->policy + " of " + callee->owner +
                                 "::" + callee->name);
        break;
      }
      default:
        break;
    }
    for (auto& ch : cmd.children) resolve_cmd(ch);
  };

  for (auto& d : prog.classes_) {
    for (auto& [name, md] : d.methods) {
      resolve_cmd(md.body);
      int next = 0;
      detail::number_points(md.body, next);
      detail::collect_vars(md.body, md.local_vars);
      md.local_vars.insert(md.param);
      md.local_vars.insert(kResultVar);
    }
  }
  return prog;
}

struct OverrideViolation {
  std::string base_class;
  std::string derived_class;
  std::string method;
  PolicyId base_policy;
  PolicyId derived_policy;
};

/// Every overriding copy method must carry a policy that includes the
/// overridden one's entries.
inline std::vector<OverrideViolation> check_overriding(const Program& p) {
  std::vector<OverrideViolation> out;
  for (const auto& c : p.classes()) {
    if (!c.super_name) continue;
    for (const auto& [name, md] : c.methods) {
      const MethodDecl* base = p.find_method(*c.super_name, name);
      if (!base) continue;
      if (!policy_included(p.policy(base->policy), p.policy(md.policy)))
        out.push_back({base->owner, c.name, name, base->policy, md.policy});
    }
  }
  return out;
}

}  // namespace clonecheck
