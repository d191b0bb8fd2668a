#pragma once

// Reference big-step interpreter with locally-allocated-set tracking.

#include <compare>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clonecheck/lang.hpp"

namespace clonecheck {

using Loc = int;

struct Value {
  Loc loc = -1;  // -1 is null

  static Value null() { return {}; }
  static Value at(Loc l) { return {l}; }
  bool is_null() const { return loc < 0; }
  auto operator<=>(const Value&) const = default;
};

struct Object {
  std::string cls;
  std::map<std::string, Value> fields;
  bool operator==(const Object&) const = default;
};

/// Locations are indices in allocation order and are never reused.
using Heap = std::vector<Object>;
using Env = std::map<std::string, Value>;

struct ConcreteState {
  Env env;
  Heap heap;
  std::set<Loc> alloc;
  bool operator==(const ConcreteState&) const = default;

  bool in_dom(Value v) const {
    return !v.is_null() && v.loc < static_cast<Loc>(heap.size());
  }
};

enum class StuckReason { NullDereference, BadReceiverClass, MethodNotFound, NoSuchField };

inline const char* to_string(StuckReason r) {
  switch (r) {
    case StuckReason::NullDereference: return "NullDereference";
    case StuckReason::BadReceiverClass: return "BadReceiverClass";
    case StuckReason::MethodNotFound: return "MethodNotFound";
    case StuckReason::NoSuchField: return "NoSuchField";
  }
  return "?";
}

struct RunOutcome {
  enum class Kind { Final, Stuck, FuelExhausted };
  Kind kind = Kind::Final;
  ConcreteState state;  // final state, or the state when the run stopped
  StuckReason reason = StuckReason::NullDereference;
  int point = -1;
  std::string method;  // `Class::m` of the frame that got stuck
  int depth = 0;       // call depth of that frame, 0 = the entry frame

  bool final() const { return kind == Kind::Final; }
  bool stuck() const { return kind == Kind::Stuck; }
};

/// Optional hook invoked around every command, with the state of the frame
/// executing it. `md` is null for commands run outside any method body.
struct Observer {
  virtual ~Observer() = default;
  virtual void before(const MethodDecl*, const Command&, const ConcreteState&) {}
  virtual void after(const MethodDecl*, const Command&, const ConcreteState&) {}
};

using Rng = std::mt19937_64;

struct InterpOptions {
  int max_fresh = 3;  // fresh objects per unknown call
};

inline std::set<Loc> reach(const Heap& h, Value v) {
  std::set<Loc> out;
  if (v.is_null()) return out;
  std::vector<Loc> work{v.loc};
  while (!work.empty()) {
    Loc l = work.back();
    work.pop_back();
    if (!out.insert(l).second) continue;
    for (const auto& [f, w] : h.at(l).fields)
      if (!w.is_null()) work.push_back(w.loc);
  }
  return out;
}

/// Locations reachable through at least one field.
inline std::set<Loc> reach_plus(const Heap& h, Value v) {
  std::set<Loc> out;
  if (v.is_null()) return out;
  for (const auto& [f, w] : h.at(v.loc).fields) {
    auto r = reach(h, w);
    out.insert(r.begin(), r.end());
  }
  return out;
}

inline Object null_object(const ClassDecl& c) {
  Object o;
  o.cls = c.name;
  for (const auto& f : c.fields) o.fields[f] = Value::null();
  return o;
}

/// Unknown-call semantics. Everything reachable from ρ(y) in at least one
/// step may be rewritten; the receiver itself and the rest of the heap are
/// untouched. New field values and the result are drawn from null, the
/// rewritable region and freshly allocated objects.
inline ConcreteState havoc_call(const Program& p, const std::string& x,
                                const std::string& y, ConcreteState s,
                                Rng& rng, const InterpOptions& opt = {}) {
  const Value vy = s.env.at(y);
  const std::set<Loc> region = reach_plus(s.heap, vy);
  std::vector<Value> pool{Value::null()};
  for (Loc l : region) pool.push_back(Value::at(l));

  std::vector<const ClassDecl*> classes;
  for (const auto& c : p.classes()) classes.push_back(&c);
  std::vector<Loc> fresh;
  if (!classes.empty() && opt.max_fresh > 0) {
    int n = std::uniform_int_distribution<int>(0, opt.max_fresh)(rng);
    for (int i = 0; i < n; ++i) {
      const ClassDecl* c = classes[std::uniform_int_distribution<std::size_t>(
          0, classes.size() - 1)(rng)];
      fresh.push_back(static_cast<Loc>(s.heap.size()));
      s.heap.push_back(null_object(*c));
      pool.push_back(Value::at(fresh.back()));
    }
  }
  auto pick = [&]() {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(
        rng)];
  };
  for (Loc l : region)
    for (auto& [f, v] : s.heap[l].fields)
      if (std::bernoulli_distribution(0.5)(rng)) v = pick();
  for (Loc l : fresh)
    for (auto& [f, v] : s.heap[l].fields) v = pick();
  for (Loc l : region) s.alloc.erase(l);
  s.env[x] = pick();
  return s;
}

namespace detail {

class Interpreter {
 public:
  Interpreter(const Program& p, long fuel, Rng& rng, Observer* obs,
              const InterpOptions& opt)
      : p_(p), fuel_(fuel), rng_(rng), obs_(obs), opt_(opt) {}

  RunOutcome run(const MethodDecl* md, const Command& c, ConcreteState s) {
    RunOutcome out;
    exec(md, c, s, out, 0);
    out.state = std::move(s);
    return out;
  }

 private:
  // Returns false when the run stopped; `out` then holds the reason.
  bool exec(const MethodDecl* md, const Command& c, ConcreteState& s,
            RunOutcome& out, int depth) {
    if (obs_) obs_->before(md, c, s);
    bool ok = step(md, c, s, out, depth);
    if (ok && obs_) obs_->after(md, c, s);
    return ok;
  }

  bool stuck(RunOutcome& out, StuckReason r, const MethodDecl* md,
             const Command& c, int depth) {
    out.kind = RunOutcome::Kind::Stuck;
    out.reason = r;
    out.point = c.point;
    out.method = md ? md->owner + "::" + md->name : "";
    out.depth = depth;
    return false;
  }

  bool step(const MethodDecl* md, const Command& c, ConcreteState& s,
            RunOutcome& out, int depth) {
    if (c.is_atomic()) {
      if (fuel_ <= 0) {
        out.kind = RunOutcome::Kind::FuelExhausted;
        out.point = c.point;
        out.depth = depth;
        return false;
      }
      --fuel_;
    }
    switch (c.kind) {
      case CommandKind::Assign:
        s.env[c.target] = s.env.at(c.source);
        return true;
      case CommandKind::AssignNull:
        s.env[c.target] = Value::null();
        return true;
      case CommandKind::GetField: {
        Value v = s.env.at(c.source);
        if (!s.in_dom(v))
          return stuck(out, StuckReason::NullDereference, md, c, depth);
        auto& o = s.heap[v.loc].fields;
        auto it = o.find(c.field);
        if (it == o.end())
          return stuck(out, StuckReason::NoSuchField, md, c, depth);
        s.env[c.target] = it->second;
        return true;
      }
      case CommandKind::PutField: {
        Value v = s.env.at(c.target);
        if (!s.in_dom(v))
          return stuck(out, StuckReason::NullDereference, md, c, depth);
        auto& o = s.heap[v.loc].fields;
        auto it = o.find(c.field);
        if (it == o.end())
          return stuck(out, StuckReason::NoSuchField, md, c, depth);
        it->second = s.env.at(c.source);
        return true;
      }
      case CommandKind::New: {
        Loc l = static_cast<Loc>(s.heap.size());
        s.heap.push_back(null_object(p_.cls(c.class_name)));
        s.alloc.insert(l);
        s.env[c.target] = Value::at(l);
        return true;
      }
      case CommandKind::Return:
        s.env[kResultVar] = s.env.at(c.source);
        return true;
      case CommandKind::UnknownCall:
        s = havoc_call(p_, c.target, c.source, std::move(s), rng_, opt_);
        return true;
      case CommandKind::CopyCall: {
        Value vy = s.env.at(c.source);
        if (!s.in_dom(vy))
          return stuck(out, StuckReason::NullDereference, md, c, depth);
        const std::string& cny = s.heap[vy.loc].cls;
        if (!p_.subclass_of(cny, c.class_name))
          return stuck(out, StuckReason::BadReceiverClass, md, c, depth);
        const MethodDecl* callee = p_.find_method(cny, c.method);
        if (!callee)
          return stuck(out, StuckReason::MethodNotFound, md, c, depth);
        ConcreteState inner;
        for (const auto& v : callee->local_vars) inner.env[v] = Value::null();
        inner.env[callee->param] = vy;
        inner.heap = std::move(s.heap);
        bool ok = exec(callee, callee->body, inner, out, depth + 1);
        s.heap = std::move(inner.heap);
        if (!ok) return false;
        s.alloc.insert(inner.alloc.begin(), inner.alloc.end());
        s.env[c.target] = inner.env.at(kResultVar);
        return true;
      }
      case CommandKind::Seq:
        for (const auto& ch : c.children)
          if (!exec(md, ch, s, out, depth)) return false;
        return true;
      case CommandKind::If: {
        bool first = std::bernoulli_distribution(0.5)(rng_);
        return exec(md, c.children.at(first ? 0 : 1), s, out, depth);
      }
      case CommandKind::While:
        while (std::bernoulli_distribution(0.5)(rng_))
          if (!exec(md, c.children.at(0), s, out, depth)) return false;
        return true;
    }
    return true;
  }

  const Program& p_;
  long fuel_;
  Rng& rng_;
  Observer* obs_;
  InterpOptions opt_;
};

}  // namespace detail

/// Evaluates `c` from `s`. `md` names the enclosing method (for diagnostics
/// and the observer) and may be null.
inline RunOutcome eval_command(const Program& p, const Command& c,
                               ConcreteState s, long fuel, Rng& rng,
                               const MethodDecl* md = nullptr,
                               Observer* obs = nullptr,
                               const InterpOptions& opt = {}) {
  return detail::Interpreter(p, fuel, rng, obs, opt).run(md, c, std::move(s));
}

inline std::string value_text(Value v) {
  return v.is_null() ? "null" : "l" + std::to_string(v.loc);
}

/// One line per location, then `env:` and `alloc:`.
inline std::string dump_state(const ConcreteState& s) {
  std::ostringstream os;
  for (std::size_t l = 0; l < s.heap.size(); ++l) {
    os << "l" << l << " : " << s.heap[l].cls << " {";
    bool first = true;
    for (const auto& [f, v] : s.heap[l].fields) {
      os << (first ? " " : ", ") << f << " -> " << value_text(v);
      first = false;
    }
    os << (first ? "}" : " }") << "\n";
  }
  os << "env:";
  for (const auto& [x, v] : s.env) os << " " << x << " -> " << value_text(v) << ";";
  os << "\nalloc:";
  for (Loc l : s.alloc) os << " l" << l;
  os << "\n";
  return os.str();
}

}  // namespace clonecheck
