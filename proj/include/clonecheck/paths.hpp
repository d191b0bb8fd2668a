#pragma once

// Access paths and the dynamic copy-policy oracle.

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "clonecheck/interp.hpp"

namespace clonecheck {

struct AccessPath {
  std::string var;
  std::vector<std::string> fields;

  std::string text() const {
    std::string s = var;
    for (const auto& f : fields) s += "." + f;
    return s;
  }
};

/// Concrete path evaluation; absent once a step leaves dom(h).
inline std::optional<Value> eval_path(const Env& rho, const Heap& h,
                                      const AccessPath& pi) {
  auto it = rho.find(pi.var);
  if (it == rho.end()) return std::nullopt;
  Value v = it->second;
  for (const auto& f : pi.fields) {
    if (v.is_null() || v.loc >= static_cast<Loc>(h.size())) return std::nullopt;
    auto fit = h[v.loc].fields.find(f);
    if (fit == h[v.loc].fields.end()) return std::nullopt;
    v = fit->second;
  }
  return v;
}

/// ⊢ π : τ. Each field of π must be deep in the policy reached so far.
inline bool path_in_policy(const AccessPath& pi, const Policy& tau,
                           const Program& p) {
  const Policy* cur = &tau;
  for (const auto& f : pi.fields) {
    auto it = cur->deep.find(f);
    if (it == cur->deep.end()) return false;
    cur = &p.policy(it->second);
  }
  return true;
}

/// Locations denoted by the policy-deep paths rooted at x.
inline std::set<Loc> deep_region(const Env& rho, const Heap& h,
                                 const std::string& x, const Policy& tau,
                                 const Program& p) {
  std::set<Loc> out;
  Value vx = rho.at(x);
  if (vx.is_null()) return out;
  std::set<std::pair<Loc, const Policy*>> seen;
  std::vector<std::pair<Loc, const Policy*>> work{{vx.loc, &tau}};
  while (!work.empty()) {
    auto st = work.back();
    work.pop_back();
    if (!seen.insert(st).second) continue;
    out.insert(st.first);
    const auto& fields = h.at(st.first).fields;
    for (const auto& [f, xid] : st.second->deep) {
      auto it = fields.find(f);
      if (it == fields.end() || it->second.is_null()) continue;
      work.emplace_back(it->second.loc, &p.policy(xid));
    }
  }
  return out;
}

/// ρ,h,x ⊨ τ: nothing reachable from another variable lies in the deep
/// region of x.
inline bool policy_holds(const Env& rho, const Heap& h, const std::string& x,
                         const Policy& tau, const Program& p) {
  std::set<Loc> d = deep_region(rho, h, x, tau, p);
  if (d.empty()) return true;
  for (const auto& [y, v] : rho) {
    if (y == x) continue;
    for (Loc l : reach(h, v))
      if (d.count(l)) return false;
  }
  return true;
}

enum class Verdict { Holds, Violation, Vacuous };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "Holds";
    case Verdict::Violation: return "Violation";
    case Verdict::Vacuous: return "Vacuous";
  }
  return "?";
}

struct CallResult {
  Verdict verdict = Verdict::Vacuous;
  RunOutcome outcome;
};

inline Command make_call(const std::string& x, const std::string& cn,
                         const PolicyId& policy, const std::string& m,
                         const std::string& y) {
  Command c;
  c.kind = CommandKind::CopyCall;
  c.target = x;
  c.class_name = cn;
  c.policy = policy;
  c.method = m;
  c.source = y;
  return c;
}

/// Runs `x := call cn::m[X](y)` and checks the resulting state against X.
inline CallResult secure_call_check(const Program& p,
                                    const ConcreteState& caller,
                                    const std::string& x, const std::string& cn,
                                    const PolicyId& policy,
                                    const std::string& m, const std::string& y,
                                    Rng& rng, long fuel,
                                    Observer* obs = nullptr) {
  CallResult r;
  Command call = make_call(x, cn, policy, m, y);
  r.outcome = eval_command(p, call, caller, fuel, rng, nullptr, obs);
  if (!r.outcome.final()) return r;
  const auto& s = r.outcome.state;
  r.verdict = policy_holds(s.env, s.heap, x, p.policy(policy), p)
                  ? Verdict::Holds
                  : Verdict::Violation;
  return r;
}

}  // namespace clonecheck
