#pragma once

// Graph-shaped abstract types: (Γ, Δ, Θ), sub-typing, canonical form and
// the concrete interpretation of a type.

#include <cctype>
#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clonecheck/interp.hpp"
#include "clonecheck/paths.hpp"

namespace clonecheck {

using NodeId = int;

enum class BaseKind : std::uint8_t { Bot, TopOut, Top, Node };

struct BaseType {
  BaseKind kind = BaseKind::Bot;
  NodeId node = 0;

  static BaseType bot() { return {}; }
  static BaseType top_out() { return {BaseKind::TopOut, 0}; }
  static BaseType top() { return {BaseKind::Top, 0}; }
  static BaseType at(NodeId n) { return {BaseKind::Node, n}; }

  bool is_bot() const { return kind == BaseKind::Bot; }
  bool is_top_out() const { return kind == BaseKind::TopOut; }
  bool is_top() const { return kind == BaseKind::Top; }
  bool is_node() const { return kind == BaseKind::Node; }

  auto operator<=>(const BaseType&) const = default;
};

inline std::string to_string(BaseType t) {
  switch (t.kind) {
    case BaseKind::Bot: return "Bot";
    case BaseKind::TopOut: return "TopOut";
    case BaseKind::Top: return "Top";
    case BaseKind::Node: return "n" + std::to_string(t.node);
  }
  return "?";
}

using Edges = std::map<std::string, BaseType>;

/// T = (Γ, Δ, Θ). Γ is total: a variable missing from `gamma` is ⊥.
struct TypeTriple {
  std::map<std::string, BaseType> gamma;
  std::map<NodeId, Edges> delta;
  std::set<NodeId> theta;

  BaseType var(const std::string& x) const {
    auto it = gamma.find(x);
    return it == gamma.end() ? BaseType::bot() : it->second;
  }

  void set(const std::string& x, BaseType t) { gamma[x] = t; }

  NodeId fresh_node() const {
    return delta.empty() ? 1 : delta.rbegin()->first + 1;
  }

  bool operator==(const TypeTriple&) const = default;
};

/// σ: node of the source graph to a node of the target graph or ⊤.
using FusionMap = std::map<NodeId, BaseType>;

/// Θ ⊆ dom(Δ) and every node mentioned is in dom(Δ).
inline bool well_formed(const TypeTriple& t) {
  auto ok = [&](BaseType b) { return !b.is_node() || t.delta.count(b.node); };
  for (const auto& [x, b] : t.gamma)
    if (!ok(b)) return false;
  for (const auto& [n, es] : t.delta)
    for (const auto& [f, b] : es)
      if (!ok(b)) return false;
  for (NodeId n : t.theta)
    if (!t.delta.count(n)) return false;
  return true;
}

/// Abstract path evaluation. ⊤ and ⊤out are sinks; stepping from ⊥ or
/// through a missing edge is undefined.
inline std::optional<BaseType> abstract_eval_path(const TypeTriple& t,
                                                  const AccessPath& pi) {
  BaseType cur = t.var(pi.var);
  for (const auto& f : pi.fields) {
    switch (cur.kind) {
      case BaseKind::Bot: return std::nullopt;
      case BaseKind::Top:
      case BaseKind::TopOut: break;
      case BaseKind::Node: {
        auto n = t.delta.find(cur.node);
        if (n == t.delta.end()) return std::nullopt;
        auto e = n->second.find(f);
        if (e == n->second.end()) return std::nullopt;
        cur = e->second;
        break;
      }
    }
  }
  return cur;
}

/// Φ(τ) for an object of class `cl`: strong entry node plus one weak node
/// per policy reachable from τ. Non-deep fields get explicit ⊤ edges.
struct PhiType {
  NodeId entry = 1;
  std::map<NodeId, Edges> delta;
};

inline PhiType phi_translate(const Policy& tau, const ClassDecl& cl,
                             const Program& p, NodeId first = 1) {
  PhiType out;
  out.entry = first;
  std::map<PolicyId, NodeId> ids;
  std::deque<PolicyId> work;
  NodeId next = first + 1;
  auto node_for = [&](const PolicyId& x) {
    auto it = ids.find(x);
    if (it != ids.end()) return it->second;
    p.policy(x);  // throws on an unknown policy
    ids[x] = next;
    work.push_back(x);
    return next++;
  };
  auto edges_for = [&](const Policy& pol, const std::vector<std::string>& fields) {
    Edges es;
    for (const auto& f : fields) es[f] = BaseType::top();
    for (const auto& [f, x] : pol.deep) es[f] = BaseType::at(node_for(x));
    return es;
  };
  out.delta[first] = edges_for(tau, cl.fields);
  while (!work.empty()) {
    PolicyId x = work.front();
    work.pop_front();
    const Policy& pol = p.policy(x);
    out.delta[ids.at(x)] = edges_for(pol, p.cls(pol.owner).fields);
  }
  return out;
}

/// Decides T1 ⊑ T2 and returns the witnessing fusion map.
///
/// Both graphs are deterministic, so walking them in lockstep from every
/// variable forces σ on every reachable node of T1; unreachable nodes go
/// to ⊤, which never adds a preimage for ST3.
inline std::optional<FusionMap> subtype(const TypeTriple& t1,
                                        const TypeTriple& t2) {
  FusionMap sigma;
  std::vector<std::pair<BaseType, BaseType>> work;
  std::set<std::string> vars;
  for (const auto& [x, b] : t1.gamma) vars.insert(x);
  for (const auto& [x, b] : t2.gamma) vars.insert(x);
  for (const auto& x : vars) work.emplace_back(t1.var(x), t2.var(x));
  while (!work.empty()) {
    auto [a, b] = work.back();
    work.pop_back();
    switch (a.kind) {
      case BaseKind::Bot:
        continue;
      case BaseKind::Top:
        if (!b.is_top()) return std::nullopt;
        continue;
      case BaseKind::TopOut:
        if (!b.is_top() && !b.is_top_out()) return std::nullopt;
        continue;
      case BaseKind::Node:
        break;
    }
    if (!b.is_node() && !b.is_top()) return std::nullopt;
    auto it = sigma.find(a.node);
    if (it != sigma.end()) {
      if (it->second != b) return std::nullopt;
      continue;
    }
    sigma[a.node] = b;
    auto n1 = t1.delta.find(a.node);
    if (n1 == t1.delta.end()) continue;
    const Edges* e2 = nullptr;
    if (b.is_node()) {
      auto n2 = t2.delta.find(b.node);
      if (n2 == t2.delta.end()) return std::nullopt;
      e2 = &n2->second;
    }
    for (const auto& [f, succ] : n1->second) {
      if (!e2) {
        work.emplace_back(succ, BaseType::top());
        continue;
      }
      auto e = e2->find(f);
      if (e == e2->end()) return std::nullopt;
      work.emplace_back(succ, e->second);
    }
  }
  // Strong nodes of T2 that no path reaches can only be hit by nodes of
  // T1 that no path reaches either; pair them up with unforced strong ones.
  std::vector<NodeId> spare;
  for (NodeId n : t1.theta)
    if (!sigma.count(n) && t1.delta.count(n)) spare.push_back(n);
  for (NodeId n2 : t2.theta) {
    std::vector<NodeId> pre;
    for (const auto& [n1, img] : sigma)
      if (img == BaseType::at(n2)) pre.push_back(n1);
    if (pre.empty() && !spare.empty()) {
      sigma[spare.back()] = BaseType::at(n2);
      spare.pop_back();
      continue;
    }
    if (pre.size() != 1 || !t1.theta.count(pre[0])) return std::nullopt;
  }
  for (const auto& [n, es] : t1.delta)
    if (!sigma.count(n)) sigma[n] = BaseType::top();
  return sigma;
}

inline bool is_subtype(const TypeTriple& a, const TypeTriple& b) {
  return subtype(a, b).has_value();
}

/// Restriction to variable-reachable nodes with breadth-first canonical
/// numbering n1, n2, ... (variables and fields in lexicographic order).
/// `renaming`, when given, receives old id -> new id for kept nodes.
inline TypeTriple gc_canonicalize(const TypeTriple& t,
                                  std::map<NodeId, NodeId>* renaming = nullptr) {
  std::map<NodeId, NodeId> ren;
  std::deque<NodeId> queue;
  auto visit = [&](BaseType b) {
    if (!b.is_node() || ren.count(b.node) || !t.delta.count(b.node)) return;
    NodeId id = static_cast<NodeId>(ren.size()) + 1;
    ren[b.node] = id;
    queue.push_back(b.node);
  };
  for (const auto& [x, b] : t.gamma) {
    visit(b);
    while (!queue.empty()) {
      NodeId n = queue.front();
      queue.pop_front();
      for (const auto& [f, s] : t.delta.at(n)) visit(s);
    }
  }
  auto rename = [&](BaseType b) {
    if (!b.is_node()) return b;
    auto it = ren.find(b.node);
    return it == ren.end() ? BaseType::top() : BaseType::at(it->second);
  };
  TypeTriple out;
  for (const auto& [x, b] : t.gamma)
    if (!b.is_bot()) out.gamma[x] = rename(b);
  for (const auto& [old, id] : ren) {
    Edges& es = out.delta[id];
    for (const auto& [f, s] : t.delta.at(old)) es[f] = rename(s);
    if (t.theta.count(old)) out.theta.insert(id);
  }
  if (renaming) *renaming = std::move(ren);
  return out;
}

/// T1 ≡ T2, decided by comparing canonical forms.
inline bool type_equiv(const TypeTriple& a, const TypeTriple& b) {
  return gc_canonicalize(a) == gc_canonicalize(b);
}

/// ρ,h,A ⊨ Γ,Δ,Θ.
///
/// Walks every concrete access path in lockstep with its abstract image
/// (or "undefined"). The pair space is finite, so the walk terminates on
/// cyclic heaps and graphs. Expansion continues below ⊤ and undefined
/// images: a location denoted by a node must not be reachable by any path
/// whose abstract image differs.
inline bool interp_check(const ConcreteState& s, const TypeTriple& t) {
  // Abstract component: a base type, or none for an undefined path.
  using Abs = std::optional<BaseType>;
  std::set<std::pair<Loc, Abs>> seen;
  std::vector<std::pair<Loc, Abs>> work;
  auto push = [&](Value v, Abs a) {
    if (v.is_null()) return;
    if (seen.emplace(v.loc, a).second) work.emplace_back(v.loc, a);
  };
  for (const auto& [x, v] : s.env) push(v, t.var(x));
  while (!work.empty()) {
    auto [l, a] = work.back();
    work.pop_back();
    if (a && a->is_top_out()) continue;  // checked below; Reach is closed
    for (const auto& [f, w] : s.heap.at(l).fields) {
      Abs next;
      if (a) {
        switch (a->kind) {
          case BaseKind::Bot: break;
          case BaseKind::Top: next = *a; break;
          case BaseKind::TopOut: next = *a; break;
          case BaseKind::Node: {
            auto n = t.delta.find(a->node);
            if (n != t.delta.end()) {
              auto e = n->second.find(f);
              if (e != n->second.end()) next = e->second;
            }
            break;
          }
        }
      }
      push(w, next);
    }
  }
  std::map<Loc, std::set<Abs>> by_loc;
  std::map<NodeId, std::set<Loc>> by_node;
  for (const auto& [l, a] : seen) {
    by_loc[l].insert(a);
    if (a && a->is_node()) by_node[a->node].insert(l);
  }
  for (const auto& [l, as] : by_loc) {
    for (const Abs& a : as) {
      if (!a) continue;
      switch (a->kind) {
        case BaseKind::Bot:
          return false;
        case BaseKind::Top:
          break;
        case BaseKind::TopOut:
          for (Loc r : reach(s.heap, Value::at(l)))
            if (s.alloc.count(r)) return false;
          break;
        case BaseKind::Node:
          if (!s.alloc.count(l) || !t.delta.count(a->node) || as.size() != 1)
            return false;
          break;
      }
    }
  }
  for (NodeId n : t.theta) {
    auto it = by_node.find(n);
    if (it != by_node.end() && it->second.size() > 1) return false;
  }
  return true;
}

/// Canonical text: `type { env { ... } heap { ... } strong { ... } }`.
inline std::string type_text(const TypeTriple& t) {
  std::ostringstream os;
  os << "type { env {";
  for (const auto& [x, b] : t.gamma)
    if (!b.is_bot()) os << " " << x << " -> " << to_string(b) << ";";
  os << " } heap {";
  for (const auto& [n, es] : t.delta) {
    if (es.empty()) os << " n" << n << ";";
    for (const auto& [f, b] : es)
      os << " n" << n << "." << f << " -> " << to_string(b) << ";";
  }
  os << " } strong {";
  bool first = true;
  for (NodeId n : t.theta) {
    os << (first ? " " : ", ") << "n" << n;
    first = false;
  }
  os << " } }";
  return os.str();
}

/// Inverse of `type_text`. Nodes without edges may be declared by listing
/// them in `strong` or with a bare `nK;` entry in the heap block.
inline TypeTriple parse_type(const std::string& text) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < text.size();) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '-' && i + 1 < text.size() && text[i + 1] == '>') {
      toks.push_back("->");
      i += 2;
    } else if (std::string_view("{};,.").find(c) != std::string_view::npos) {
      toks.emplace_back(1, c);
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      if (j == i) throw std::invalid_argument("bad type text near " + text.substr(i));
      toks.push_back(text.substr(i, j - i));
      i = j;
    }
  }
  std::size_t k = 0;
  auto next = [&]() -> const std::string& {
    if (k >= toks.size()) throw std::invalid_argument("truncated type text");
    return toks[k++];
  };
  auto peek = [&]() -> const std::string& {
    if (k >= toks.size()) throw std::invalid_argument("truncated type text");
    return toks[k];
  };
  auto expect = [&](const char* s) {
    if (next() != s)
      throw std::invalid_argument(std::string("expected ") + s + " in type text");
  };
  auto node_id = [](const std::string& s) {
    if (s.size() < 2 || s[0] != 'n') throw std::invalid_argument("bad node " + s);
    return std::stoi(s.substr(1));
  };
  auto base = [&](const std::string& s) {
    if (s == "Bot") return BaseType::bot();
    if (s == "TopOut") return BaseType::top_out();
    if (s == "Top") return BaseType::top();
    return BaseType::at(node_id(s));
  };
  TypeTriple t;
  expect("type");
  expect("{");
  expect("env");
  expect("{");
  while (peek() != "}") {
    std::string x = next();
    expect("->");
    t.gamma[x] = base(next());
    expect(";");
  }
  expect("}");
  expect("heap");
  expect("{");
  while (peek() != "}") {
    NodeId n = node_id(next());
    Edges& es = t.delta[n];
    if (peek() == ";") {
      ++k;
      continue;
    }
    expect(".");
    std::string f = next();
    expect("->");
    es[f] = base(next());
    expect(";");
  }
  expect("}");
  expect("strong");
  expect("{");
  while (peek() != "}") {
    NodeId n = node_id(next());
    t.theta.insert(n);
    t.delta[n];
    if (peek() == ",") ++k;
  }
  expect("}");
  expect("}");
  for (const auto& [x, b] : t.gamma)
    if (b.is_node()) t.delta[b.node];
  for (auto& [n, es] : t.delta)
    for (const auto& [f, b] : es)
      if (b.is_node() && !t.delta.count(b.node))
        throw std::invalid_argument("edge to undeclared node n" +
                                    std::to_string(b.node));
  return t;
}

}  // namespace clonecheck
