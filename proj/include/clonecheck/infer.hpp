#pragma once

// The checker: join, widening, command transfer functions and method and
// program verdicts.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "clonecheck/abstract.hpp"
#include "clonecheck/lang.hpp"
#include "clonecheck/parser.hpp"

namespace clonecheck {

namespace detail {

enum : std::uint8_t { kBot = 1, kTopOut = 2, kTop = 4 };

/// Non-deterministic graph over side-tagged nodes. Cells are union-find
/// classes; ⊥/⊤out/⊤ occurrences are fresh flag atoms, never shared.
class Ndg {
 public:
  explicit Ndg(int sides) : sides_(sides) {}

  void add_graph(int side, const TypeTriple& t) {
    for (const auto& [n, es] : t.delta) node_elem(side, n);
    for (NodeId n : t.theta) strong_.insert({side, n});
    for (const auto& [n, es] : t.delta)
      for (const auto& [f, b] : es)
        edges_.emplace_back(node_elem(side, n), f, elem(side, b));
  }

  int elem(int side, BaseType b) {
    if (b.is_node()) return node_elem(side, b.node);
    std::uint8_t fl = b.is_bot() ? kBot : b.is_top_out() ? kTopOut : kTop;
    return make(-1, 0, fl);
  }

  int node_elem(int side, NodeId n) {
    auto it = index_.find({side, n});
    if (it != index_.end()) return it->second;
    int e = make(side, n, 0);
    index_[{side, n}] = e;
    return e;
  }

  int find(int e) {
    while (parent_[e] != e) e = parent_[e] = parent_[parent_[e]];
    return e;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

  /// Fuses non-deterministic successors until every (cell, field) has at
  /// most one successor cell.
  void determinize() {
    bool changed = true;
    while (changed) {
      changed = false;
      std::map<std::pair<int, std::string>, int> succ;
      for (const auto& [src, f, dst] : edges_) {
        auto key = std::make_pair(find(src), f);
        auto it = succ.find(key);
        if (it == succ.end()) {
          succ.emplace(key, find(dst));
        } else if (find(it->second) != find(dst)) {
          unite(it->second, dst);
          changed = true;
        }
      }
    }
  }

  /// Converts the deterministic NDG back into a type. `entries` gives the
  /// element denoting each variable.
  TypeTriple ground(const std::map<std::string, int>& entries,
                    std::vector<FusionMap>* sigmas = nullptr) {
    const int n = static_cast<int>(parent_.size());
    struct Cell {
      std::uint8_t flags = 0;
      std::vector<int> nodes_per_side;
      std::vector<int> strong_per_side;
      bool has_nodes = false;
    };
    std::map<int, Cell> cells;
    for (int e = 0; e < n; ++e) {
      Cell& c = cells[find(e)];
      if (c.nodes_per_side.empty()) {
        c.nodes_per_side.assign(sides_, 0);
        c.strong_per_side.assign(sides_, 0);
      }
      c.flags |= flags_[e];
      if (side_[e] >= 0) {
        c.has_nodes = true;
        ++c.nodes_per_side[side_[e]];
        if (strong_.count({side_[e], node_[e]})) ++c.strong_per_side[side_[e]];
      }
    }
    std::map<int, std::set<int>> succ;
    for (const auto& [src, f, dst] : edges_) succ[find(src)].insert(find(dst));

    // A node cell is ⊤ when it holds ⊤, or ⊤out together with nodes, or
    // when it is reachable from such a cell: every node below a ⊤ image
    // must map to ⊤ as well.
    std::set<int> top;
    std::vector<int> work;
    for (const auto& [r, c] : cells)
      if ((c.flags & kTop) || (c.has_nodes && (c.flags & kTopOut))) {
        top.insert(r);
        work.push_back(r);
      }
    while (!work.empty()) {
      int r = work.back();
      work.pop_back();
      for (int s : succ[r])
        if (cells[s].has_nodes && top.insert(s).second) work.push_back(s);
    }

    std::map<int, BaseType> image;
    TypeTriple out;
    NodeId next = 1;
    for (const auto& [r, c] : cells) {
      if (top.count(r) || (c.flags & kTop)) {
        image[r] = BaseType::top();
      } else if (c.has_nodes) {
        image[r] = BaseType::at(next);
        out.delta[next];
        bool strong = true;
        for (int s = 0; s < sides_; ++s)
          strong = strong && c.nodes_per_side[s] == 1 && c.strong_per_side[s] == 1;
        if (strong) out.theta.insert(next);
        ++next;
      } else if (c.flags & kTopOut) {
        image[r] = BaseType::top_out();
      } else {
        image[r] = BaseType::bot();
      }
    }
    for (const auto& [src, f, dst] : edges_) {
      BaseType s = image.at(find(src));
      if (s.is_node()) out.delta[s.node][f] = image.at(find(dst));
    }
    for (const auto& [x, e] : entries) {
      BaseType b = image.at(find(e));
      if (!b.is_bot()) out.gamma[x] = b;
    }
    if (sigmas) {
      sigmas->assign(sides_, {});
      for (const auto& [key, e] : index_)
        (*sigmas)[key.first][key.second] = image.at(find(e));
    }
    return out;
  }

 private:
  int make(int side, NodeId n, std::uint8_t fl) {
    int e = static_cast<int>(parent_.size());
    parent_.push_back(e);
    side_.push_back(side);
    node_.push_back(n);
    flags_.push_back(fl);
    return e;
  }

  int sides_;
  std::vector<int> parent_;
  std::vector<int> side_;
  std::vector<NodeId> node_;
  std::vector<std::uint8_t> flags_;
  std::map<std::pair<int, NodeId>, int> index_;
  std::set<std::pair<int, NodeId>> strong_;
  std::vector<std::tuple<int, std::string, int>> edges_;
};

}  // namespace detail

struct JoinResult {
  TypeTriple type;
  FusionMap sigma1;
  FusionMap sigma2;
};

/// Least upper bound of two types.
inline JoinResult join_with_maps(const TypeTriple& t1, const TypeTriple& t2) {
  detail::Ndg g(2);
  g.add_graph(0, t1);
  g.add_graph(1, t2);
  std::set<std::string> vars;
  for (const auto& [x, b] : t1.gamma) vars.insert(x);
  for (const auto& [x, b] : t2.gamma) vars.insert(x);
  std::map<std::string, int> entries;
  for (const auto& x : vars) {
    int a = g.elem(0, t1.var(x));
    int b = g.elem(1, t2.var(x));
    g.unite(a, b);
    entries[x] = a;
  }
  g.determinize();
  std::vector<FusionMap> sigmas;
  JoinResult r;
  r.type = g.ground(entries, &sigmas);
  r.sigma1 = std::move(sigmas[0]);
  r.sigma2 = std::move(sigmas[1]);
  return r;
}

inline TypeTriple join(const TypeTriple& t1, const TypeTriple& t2) {
  return join_with_maps(t1, t2).type;
}

/// Minimal field distance from any variable, for reachable nodes.
inline std::map<NodeId, int> node_depths(const TypeTriple& t) {
  std::map<NodeId, int> depth;
  std::deque<NodeId> queue;
  for (const auto& [x, b] : t.gamma)
    if (b.is_node() && t.delta.count(b.node) && !depth.count(b.node)) {
      depth[b.node] = 0;
      queue.push_back(b.node);
    }
  while (!queue.empty()) {
    NodeId n = queue.front();
    queue.pop_front();
    for (const auto& [f, s] : t.delta.at(n))
      if (s.is_node() && !depth.count(s.node)) {
        depth[s.node] = depth[n] + 1;
        queue.push_back(s.node);
      }
  }
  return depth;
}

/// Collapses every node whose minimal variable distance is at least 2 with
/// its predecessors, until all nodes sit at depth 0 or 1.
inline TypeTriple widen(const TypeTriple& input) {
  TypeTriple t = gc_canonicalize(input);
  while (true) {
    auto depth = node_depths(t);
    std::optional<NodeId> deep;
    for (const auto& [n, d] : depth)
      if (d >= 2) {
        deep = n;
        break;
      }
    if (!deep) return t;
    detail::Ndg g(1);
    g.add_graph(0, t);
    std::map<std::string, int> entries;
    for (const auto& [x, b] : t.gamma) entries[x] = g.elem(0, b);
    int target = g.node_elem(0, *deep);
    for (const auto& [n, es] : t.delta)
      for (const auto& [f, s] : es)
        if (s == BaseType::at(*deep)) g.unite(target, g.node_elem(0, n));
    g.determinize();
    t = gc_canonicalize(g.ground(entries));
  }
}

/// Removes every node reachable from n in at least one step and sends all
/// references into the removed part, and n's own edges, to ⊤. When n lies
/// on a cycle it is itself reachable and is removed as well.
inline TypeTriple kill_succ(NodeId n, TypeTriple t) {
  std::set<NodeId> killed;
  std::vector<NodeId> work;
  auto push_succ = [&](NodeId m) {
    auto it = t.delta.find(m);
    if (it == t.delta.end()) return;
    for (const auto& [f, s] : it->second)
      if (s.is_node() && killed.insert(s.node).second) work.push_back(s.node);
  };
  push_succ(n);
  while (!work.empty()) {
    NodeId m = work.back();
    work.pop_back();
    push_succ(m);
  }
  for (NodeId m : killed) {
    t.delta.erase(m);
    t.theta.erase(m);
  }
  auto fix = [&](BaseType& b) {
    if (b.is_node() && killed.count(b.node)) b = BaseType::top();
  };
  for (auto& [x, b] : t.gamma) fix(b);
  for (auto& [m, es] : t.delta)
    for (auto& [f, b] : es) fix(b);
  if (!killed.count(n))
    for (auto& [f, b] : t.delta[n]) b = BaseType::top();
  return t;
}

struct InferOptions {
  // Deliberately unsound variant used to check that the fuzzer notices.
  bool strong_update_on_weak = false;
};

struct Rejection {
  std::string rule;  // NonLocalWrite, DefiniteNullDeref, CallOnTop, ...
  int point = -1;
  SourcePos pos;
  std::string message;
};

struct PointTypes {
  TypeTriple before;
  TypeTriple after;
};

/// Types recorded at every program point of one method body.
struct PointLog {
  std::map<int, PointTypes> types;
  std::map<int, int> loop_iterations;  // While point -> transfers of the body
};

namespace detail {

struct Rejected {
  Rejection r;
};

class Transfer {
 public:
  Transfer(const Program& p, const InferOptions& opt, PointLog* log,
           int iteration_cap)
      : p_(p), opt_(opt), log_(log), cap_(iteration_cap) {}

  TypeTriple run(const Command& c, TypeTriple t) {
    TypeTriple before = t;
    TypeTriple after = step(c, std::move(t));
    if (log_ && c.point >= 0 && c.kind != CommandKind::While)
      log_->types[c.point] = {std::move(before), after};
    return after;
  }

 private:
  [[noreturn]] void reject(const Command& c, const char* rule,
                           const std::string& msg) {
    throw Rejected{{rule, c.point, c.pos, msg}};
  }

  TypeTriple add_phi(const Command& c, TypeTriple t) {
    PhiType phi = phi_translate(p_.policy(c.policy), p_.cls(c.class_name), p_,
                                t.fresh_node());
    for (auto& [n, es] : phi.delta) t.delta[n] = std::move(es);
    t.theta.insert(phi.entry);
    t.set(c.target, BaseType::at(phi.entry));
    return t;
  }

  TypeTriple step(const Command& c, TypeTriple t) {
    switch (c.kind) {
      case CommandKind::Assign:
        t.set(c.target, t.var(c.source));
        return t;
      case CommandKind::AssignNull:
        t.set(c.target, BaseType::bot());
        return t;
      case CommandKind::New: {
        NodeId n = t.fresh_node();
        Edges& es = t.delta[n];
        for (const auto& f : p_.cls(c.class_name).fields) es[f] = BaseType::bot();
        t.theta.insert(n);
        t.set(c.target, BaseType::at(n));
        return t;
      }
      case CommandKind::GetField: {
        BaseType y = t.var(c.source);
        if (y.is_bot())
          reject(c, "DefiniteNullDeref", c.source + " is null");
        if (y.is_node()) {
          const Edges& es = t.delta.at(y.node);
          auto it = es.find(c.field);
          t.set(c.target, it == es.end() ? BaseType::top() : it->second);
        } else {
          t.set(c.target, y);
        }
        return t;
      }
      case CommandKind::PutField: {
        BaseType x = t.var(c.target);
        if (x.is_bot())
          reject(c, "DefiniteNullDeref", c.target + " is null");
        if (!x.is_node())
          reject(c, "NonLocalWrite",
                 "write to " + c.target + "." + c.field +
                     " on an object that is not locally allocated");
        TypeTriple updated = t;
        updated.delta[x.node][c.field] = t.var(c.source);
        if (t.theta.count(x.node) || opt_.strong_update_on_weak) return updated;
        return join(t, updated);
      }
      case CommandKind::CopyCall: {
        BaseType y = t.var(c.source);
        if (y.is_top())
          reject(c, "CallOnTop", "copy call on " + c.source + " of type Top");
        if (y.is_node()) t = kill_succ(y.node, std::move(t));
        return add_phi(c, std::move(t));
      }
      case CommandKind::UnknownCall: {
        BaseType y = t.var(c.source);
        if (y.is_top())
          reject(c, "CallOnTop", "unknown call on " + c.source + " of type Top");
        if (y.is_node()) t = kill_succ(y.node, std::move(t));
        t.set(c.target, BaseType::top_out());
        return t;
      }
      case CommandKind::Return:
        t.set(kResultVar, t.var(c.source));
        return t;
      case CommandKind::Seq:
        for (const auto& ch : c.children) t = run(ch, std::move(t));
        return t;
      case CommandKind::If: {
        TypeTriple a = run(c.children.at(0), t);
        TypeTriple b = run(c.children.at(1), std::move(t));
        return join(a, b);
      }
      case CommandKind::While:
        return loop(c, std::move(t));
    }
    return t;
  }

  TypeTriple loop(const Command& c, TypeTriple t0) {
    const Command& body = c.children.at(0);
    TypeTriple inv = gc_canonicalize(t0);
    for (int k = 1; k <= cap_; ++k) {
      TypeTriple out = run(body, inv);
      TypeTriple next = gc_canonicalize(widen(gc_canonicalize(join(inv, out))));
      if (next == inv) {
        if (log_ && c.point >= 0) {
          log_->types[c.point] = {std::move(t0), inv};
          log_->loop_iterations[c.point] = k;
        }
        return inv;
      }
      inv = std::move(next);
    }
    reject(c, "IterationCap",
           "loop fixpoint did not converge within " + std::to_string(cap_) +
               " iterations");
  }

  const Program& p_;
  InferOptions opt_;
  PointLog* log_;
  int cap_;
};

}  // namespace detail

/// Result of typing a command: a type, or the rule that rejected it.
struct TransferResult {
  std::optional<TypeTriple> type;
  std::optional<Rejection> rejection;
};

inline int iteration_cap(std::size_t vars) {
  return 2 * static_cast<int>(vars) + 8;
}

inline TransferResult transfer(const Program& p, const Command& c,
                               const TypeTriple& t,
                               const InferOptions& opt = {},
                               PointLog* log = nullptr, int cap = 64) {
  TransferResult r;
  try {
    r.type = detail::Transfer(p, opt, log, cap).run(c, t);
  } catch (const detail::Rejected& e) {
    r.rejection = e.r;
  }
  return r;
}

/// Runs `body` to a post-fixpoint from `t0`; the result is the invariant.
inline TransferResult loop_fixpoint(const Program& p, const Command& body,
                                    const TypeTriple& t0,
                                    const InferOptions& opt = {},
                                    PointLog* log = nullptr, int cap = 64) {
  Command w;
  w.kind = CommandKind::While;
  w.children.push_back(body);
  return transfer(p, w, t0, opt, log, cap);
}

struct MethodVerdict {
  std::string cls;
  std::string method;
  PolicyId policy;
  bool accepted = false;
  std::optional<Rejection> reason;
  std::optional<TypeTriple> final_type;
  PointLog points;
};

inline TypeTriple initial_type(const MethodDecl& md) {
  TypeTriple t;
  t.set(md.param, BaseType::top_out());
  return t;
}

/// The expected final shape: Γ′ forced from ret onto Φ(τ).
inline std::optional<TypeTriple> expected_type(const TypeTriple& t,
                                               const PhiType& phi) {
  std::map<NodeId, NodeId> sigma;
  std::set<NodeId> to_top;
  std::vector<std::pair<BaseType, BaseType>> work{
      {t.var(kResultVar), BaseType::at(phi.entry)}};
  while (!work.empty()) {
    auto [a, b] = work.back();
    work.pop_back();
    if (!a.is_node()) continue;
    if (b.is_top()) {
      if (sigma.count(a.node)) return std::nullopt;
      if (!to_top.insert(a.node).second) continue;
    } else if (b.is_node()) {
      if (to_top.count(a.node)) return std::nullopt;
      auto it = sigma.find(a.node);
      if (it != sigma.end()) {
        if (it->second != b.node) return std::nullopt;
        continue;
      }
      sigma[a.node] = b.node;
    } else {
      continue;
    }
    auto n = t.delta.find(a.node);
    if (n == t.delta.end()) continue;
    for (const auto& [f, s] : n->second) {
      if (b.is_top()) {
        work.emplace_back(s, BaseType::top());
        continue;
      }
      const Edges& target = phi.delta.at(b.node);
      auto e = target.find(f);
      if (e != target.end()) work.emplace_back(s, e->second);
    }
  }
  TypeTriple out;
  out.delta = phi.delta;
  out.theta = {phi.entry};
  for (const auto& [x, b] : t.gamma) {
    if (b.is_node()) {
      auto it = sigma.find(b.node);
      out.gamma[x] = it == sigma.end() ? BaseType::top() : BaseType::at(it->second);
    } else {
      out.gamma[x] = b;
    }
  }
  out.gamma[kResultVar] = BaseType::at(phi.entry);
  return out;
}

inline MethodVerdict check_method(const Program& p, const ClassDecl& cl,
                                  const MethodDecl& md,
                                  const InferOptions& opt = {}) {
  MethodVerdict v;
  v.cls = cl.name;
  v.method = md.name;
  v.policy = md.policy;
  const int cap = iteration_cap(md.local_vars.size());
  TypeTriple t;
  try {
    t = detail::Transfer(p, opt, &v.points, cap).run(md.body, initial_type(md));
  } catch (const detail::Rejected& e) {
    v.reason = e.r;
    return v;
  }
  v.final_type = t;
  PhiType phi = phi_translate(p.policy(md.policy), cl, p);
  auto expected = expected_type(t, phi);
  if (expected && is_subtype(t, *expected)) {
    v.accepted = true;
  } else {
    v.reason = Rejection{"PolicyMismatch", md.body.point, md.pos,
                         "final type is not a subtype of the type of policy " +
                             md.policy};
  }
  return v;
}

struct ProgramReport {
  std::vector<OverrideViolation> overriding;
  std::vector<MethodVerdict> methods;

  std::size_t accepted() const {
    return static_cast<std::size_t>(std::count_if(
        methods.begin(), methods.end(),
        [](const MethodVerdict& m) { return m.accepted; }));
  }
  bool all_accepted() const {
    return overriding.empty() && accepted() == methods.size();
  }
};

inline ProgramReport check_program(const Program& p,
                                   const InferOptions& opt = {}) {
  ProgramReport r;
  r.overriding = check_overriding(p);
  for (const auto& c : p.classes())
    for (const auto& [name, md] : c.methods)
      r.methods.push_back(check_method(p, c, md, opt));
  return r;
}

}  // namespace clonecheck
