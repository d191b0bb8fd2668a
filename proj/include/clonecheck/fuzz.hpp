#pragma once

// Seeded soundness fuzzing: random caller states, secure-call checks and
// subject-reduction sampling inside callee frames.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "clonecheck/abstract.hpp"
#include "clonecheck/infer.hpp"
#include "clonecheck/interp.hpp"
#include "clonecheck/paths.hpp"

namespace clonecheck {

/// Variables of the synthetic caller: `x := call C::m[X](y)` with two
/// extra aliases into the input heap.
inline const std::vector<std::string>& caller_vars() {
  static const std::vector<std::string> v = {"a1", "a2", "x", "y"};
  return v;
}

/// A caller heap of 1..K objects. Object l0 is the receiver `y` and its
/// class is a subclass of `cn`. K = 0 yields a null receiver.
inline ConcreteState random_caller_state(const Program& p, const std::string& cn,
                                         int heap_size, Rng& rng) {
  ConcreteState s;
  for (const auto& v : caller_vars()) s.env[v] = Value::null();
  if (heap_size <= 0) return s;
  int n = std::uniform_int_distribution<int>(1, heap_size)(rng);
  auto pick_class = [&](const std::vector<std::string>& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };
  std::vector<std::string> all;
  for (const auto& c : p.classes()) all.push_back(c.name);
  for (int i = 0; i < n; ++i) {
    std::string c = i == 0 ? pick_class(p.subclasses_of(cn)) : pick_class(all);
    s.heap.push_back(null_object(p.cls(c)));
  }
  auto pick_value = [&]() {
    int k = std::uniform_int_distribution<int>(-1, n - 1)(rng);
    return k < 0 ? Value::null() : Value::at(k);
  };
  for (auto& o : s.heap)
    for (auto& [f, v] : o.fields) v = pick_value();
  s.env["y"] = Value::at(0);
  s.env["a1"] = pick_value();
  s.env["a2"] = pick_value();
  return s;
}

/// Checks interp(s, T_before) ⇒ interp(s', T_after) around every command
/// of a method whose per-point types are known.
class SubjectReduction : public Observer {
 public:
  struct Failure {
    std::string method;
    int point = -1;
    std::string command;
    ConcreteState before;
    ConcreteState after;
    TypeTriple type_before;
    TypeTriple type_after;
  };

  void add(const MethodDecl* md, const PointLog* log) { logs_[md] = log; }

  void reset_run() { stack_.clear(); }

  void before(const MethodDecl* md, const Command& c,
              const ConcreteState& s) override {
    const PointTypes* pt = lookup(md, c);
    Frame f{pt, false, {}};
    if (pt) {
      f.holds = interp_check(s, pt->before);
      if (f.holds) f.state = s;
    }
    stack_.push_back(std::move(f));
  }

  void after(const MethodDecl* md, const Command& c,
             const ConcreteState& s) override {
    if (stack_.empty()) return;
    Frame f = std::move(stack_.back());
    stack_.pop_back();
    if (!f.types || !f.holds) return;
    ++checked_;
    if (interp_check(s, f.types->after)) return;
    if (failures_.size() < 16)
      failures_.push_back({md->owner + "::" + md->name, c.point,
                           command_text(c), f.state, s, f.types->before,
                           f.types->after});
    ++failed_;
  }

  long checked() const { return checked_; }
  long failed() const { return failed_; }
  const std::vector<Failure>& failures() const { return failures_; }

 private:
  struct Frame {
    const PointTypes* types;
    bool holds;
    ConcreteState state;
  };

  const PointTypes* lookup(const MethodDecl* md, const Command& c) const {
    if (!md) return nullptr;
    auto it = logs_.find(md);
    if (it == logs_.end()) return nullptr;
    auto pt = it->second->types.find(c.point);
    return pt == it->second->types.end() ? nullptr : &pt->second;
  }

  std::map<const MethodDecl*, const PointLog*> logs_;
  std::vector<Frame> stack_;
  long checked_ = 0;
  long failed_ = 0;
  std::vector<Failure> failures_;
};

struct FuzzOptions {
  int runs = 200;
  std::uint64_t seed = 1;
  int heap_size = 8;
  long fuel = 10000;
};

struct FuzzCase {
  std::uint64_t seed = 0;
  int heap_size = 0;
  ConcreteState caller;
  RunOutcome outcome;
};

struct FuzzStats {
  long holds = 0;
  long violations = 0;
  long vacuous = 0;
  std::optional<FuzzCase> first_violation;
};

/// Seed of run `i`; each run draws its state and its execution from it.
inline std::uint64_t run_seed(std::uint64_t base, int i) {
  return base * 1000003ULL + static_cast<std::uint64_t>(i);
}

inline CallResult fuzz_one(const Program& p, const MethodDecl& md,
                           std::uint64_t seed, int heap_size, long fuel,
                           ConcreteState* caller_out = nullptr,
                           Observer* obs = nullptr) {
  Rng rng(seed);
  ConcreteState caller = random_caller_state(p, md.owner, heap_size, rng);
  if (caller_out) *caller_out = caller;
  return secure_call_check(p, caller, "x", md.owner, md.policy, md.name, "y",
                           rng, fuel, obs);
}

inline FuzzStats fuzz_method(const Program& p, const MethodDecl& md,
                             const FuzzOptions& opt, Observer* obs = nullptr) {
  FuzzStats st;
  for (int i = 0; i < opt.runs; ++i) {
    std::uint64_t seed = run_seed(opt.seed, i);
    ConcreteState caller;
    if (auto* sr = dynamic_cast<SubjectReduction*>(obs)) sr->reset_run();
    CallResult r = fuzz_one(p, md, seed, opt.heap_size, opt.fuel, &caller, obs);
    switch (r.verdict) {
      case Verdict::Holds: ++st.holds; break;
      case Verdict::Vacuous: ++st.vacuous; break;
      case Verdict::Violation:
        ++st.violations;
        if (!st.first_violation)
          st.first_violation = FuzzCase{seed, opt.heap_size, caller, r.outcome};
        break;
    }
  }
  return st;
}

/// Shrinks a violating case by retrying the same seed at smaller heap
/// bounds and keeping the smallest one that still violates.
inline FuzzCase minimize_violation(const Program& p, const MethodDecl& md,
                                   FuzzCase c, long fuel) {
  for (int k = 1; k < c.heap_size; ++k) {
    ConcreteState caller;
    CallResult r = fuzz_one(p, md, c.seed, k, fuel, &caller);
    if (r.verdict == Verdict::Violation) return {c.seed, k, caller, r.outcome};
  }
  return c;
}

}  // namespace clonecheck
