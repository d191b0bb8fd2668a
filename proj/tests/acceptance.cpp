// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "clonecheck/abstract.hpp"
#include "clonecheck/fuzz.hpp"
#include "clonecheck/infer.hpp"
#include "clonecheck/lang.hpp"
#include "clonecheck/parser.hpp"
#include "clonecheck/paths.hpp"
#include "oracles.hpp"

using namespace clonecheck;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Program load(const std::string& name) {
  return resolve_program(
      parse_program(read_source_file(std::string(CLONECHECK_CORPUS_DIR) + "/" + name)));
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const Outcome& o) {
  std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

const std::vector<std::string> kAccepted = {"list.cp", "evillist.cp", "linkedlist.cp"};

// Corpus verdicts.
Outcome corpus_verdicts() {
  auto t0 = Clock::now();
  std::ostringstream d;
  bool ok = true;
  for (const auto& f : kAccepted) {
    Program p = load(f);
    ProgramReport r = check_program(p);
    d << f << " " << r.accepted() << "/" << r.methods.size() << " accepted; ";
    ok = ok && r.all_accepted() && !r.methods.empty();
  }
  Program p = load("reject_nonlocal.cp");
  ProgramReport r = check_program(p);
  bool rejected = r.methods.size() == 1 && !r.methods[0].accepted &&
                  r.methods[0].reason && r.methods[0].reason->rule == "NonLocalWrite";
  d << "reject_nonlocal.cp "
    << (rejected ? "rejected with NonLocalWrite" : "unexpected verdict") << "; ";
  double secs = seconds_since(t0);
  d << "time " << secs << " s";
  return {ok && rejected && secs < 1.0, d.str()};
}

const Command* first_while(const Command& c) {
  if (c.kind == CommandKind::While) return &c;
  for (const auto& ch : c.children)
    if (const Command* w = first_while(ch)) return w;
  return nullptr;
}

// LinkedList intermediate types around the loop.
Outcome linkedlist_types() {
  Program p = load("linkedlist.cp");
  const ClassDecl& cl = p.cls("LinkedList");
  const MethodDecl& md = cl.methods.at("clone");
  MethodVerdict v = check_method(p, cl, md);
  const Command* w = first_while(md.body);
  if (!v.accepted || !w) return {false, "method not accepted or loop missing"};
  const PointTypes& at_loop = v.points.types.at(w->point);
  const TypeTriple& before = at_loop.before;
  const TypeTriple& inv = at_loop.after;
  const Command& body = w->children.at(0);
  const TypeTriple& body_end = v.points.types.at(body.point).after;

  auto a = abstract_eval_path(before, {"clone", {"header"}});
  auto b = abstract_eval_path(before, {"clone", {"header", "next"}});
  auto c = abstract_eval_path(before, {"clone", {"header", "previous"}});
  bool alias = a && b && c && a->is_node() && *a == *b && *a == *c &&
               before.theta.count(a->node);
  bool e_top_out = before.var("e").is_top_out();
  bool entry_sub = is_subtype(before, inv);
  bool body_sub = is_subtype(body_end, inv);
  int iters = v.points.loop_iterations.at(w->point);
  int cap = iteration_cap(md.local_vars.size());
  std::ostringstream d;
  d << "aliased strong header node " << (alias ? "yes" : "no")
    << ", e TopOut " << (e_top_out ? "yes" : "no")
    << ", entry <= invariant " << (entry_sub ? "yes" : "no")
    << ", body end <= invariant " << (body_sub ? "yes" : "no")
    << ", iterations " << iters << " (cap " << cap << ")";
  return {alias && e_top_out && entry_sub && body_sub && iters <= cap, d.str()};
}

struct FuzzTotals {
  long runs = 0, holds = 0, violations = 0, vacuous = 0, methods = 0;
  long sr_checked = 0, sr_failed = 0;
  double secs = 0;
};

FuzzTotals fuzz_corpus() {
  FuzzTotals t;
  auto t0 = Clock::now();
  FuzzOptions opt;
  opt.runs = 1000;
  opt.heap_size = 8;
  opt.seed = 1;
  for (const auto& f : kAccepted) {
    Program p = load(f);
    ProgramReport r = check_program(p);
    SubjectReduction sr;
    std::vector<const MethodDecl*> accepted;
    for (const auto& mv : r.methods) {
      const MethodDecl& md = p.cls(mv.cls).methods.at(mv.method);
      if (mv.accepted) {
        sr.add(&md, &mv.points);
        accepted.push_back(&md);
      }
    }
    for (const MethodDecl* md : accepted) {
      FuzzStats st = fuzz_method(p, *md, opt, &sr);
      t.runs += opt.runs;
      t.holds += st.holds;
      t.violations += st.violations;
      t.vacuous += st.vacuous;
      ++t.methods;
    }
    t.sr_checked += sr.checked();
    t.sr_failed += sr.failed();
  }
  t.secs = seconds_since(t0);
  return t;
}

Outcome soundness_fuzz(const FuzzTotals& t) {
  std::ostringstream d;
  d << t.methods << " methods x 1000 runs, heap <= 8: " << t.holds << " holds, "
    << t.vacuous << " vacuous, " << t.violations << " violations; time " << t.secs
    << " s";
  return {t.methods > 0 && t.violations == 0 && t.holds > 0 && t.secs < 60.0, d.str()};
}

Outcome subject_reduction(const FuzzTotals& t) {
  std::ostringstream d;
  d << t.sr_checked << " triples checked, " << t.sr_failed << " failures";
  return {t.sr_checked >= 10000 && t.sr_failed == 0, d.str()};
}

// Fixed-size bitset over the indices of one universe.
struct Bits {
  std::vector<std::uint64_t> w;
  explicit Bits(std::size_t n = 0) : w((n + 63) / 64, 0) {}
  void set(std::size_t i) { w[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return w[i / 64] >> (i % 64) & 1; }
};

struct LatticeTally {
  long types = 0, pairs = 0, triples = 0;
  long subtype_mismatch = 0, equiv_mismatch = 0, not_upper = 0, not_comm = 0;
  // Leastness: pairs whose join is not below every enumerated upper bound,
  // and among those the ones where some upper bound lies strictly below
  // the join (a defect of the join rather than a missing supremum).
  long not_least = 0, not_minimal = 0;
  // Associativity failures, and those not traced to a pair without a
  // least upper bound.
  long not_assoc = 0, assoc_unexplained = 0;
};

void check_universe(const std::vector<std::string>& vars, int max_nodes,
                    LatticeTally& tl, bool all_triples) {
  auto types = oracle::enumerate_types(vars, {"f"}, max_nodes);
  const std::size_t n = types.size();
  tl.types += static_cast<long>(n);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[type_text(types[i])] = i;

  // Up- and down-sets under the declarative relation, compared with the
  // library.
  std::vector<Bits> up(n, Bits(n)), down(n, Bits(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      bool o = oracle::subtype(types[i], types[j]);
      if (o) {
        up[i].set(j);
        down[j].set(i);
      }
      if (o != is_subtype(types[i], types[j])) ++tl.subtype_mismatch;
    }
  // Canonical forms are distinct, so mutual subtyping must not occur
  // between different indices.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (up[i].test(j) && up[j].test(i)) ++tl.equiv_mismatch;

  std::vector<Bits> no_sup(n, Bits(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      ++tl.pairs;
      TypeTriple ji = gc_canonicalize(join(types[i], types[j]));
      TypeTriple jr = gc_canonicalize(join(types[j], types[i]));
      if (!(ji == jr)) ++tl.not_comm;
      if (!is_subtype(types[i], ji) || !is_subtype(types[j], ji)) ++tl.not_upper;
      auto it = index.find(type_text(ji));
      bool least = true, minimal = true;
      if (it != index.end()) {
        const std::size_t m = it->second;
        for (std::size_t k = 0; k < up[m].w.size(); ++k) {
          std::uint64_t ub = up[i].w[k] & up[j].w[k];
          if (ub & ~up[m].w[k]) least = false;
          // Upper bounds below the join other than the join itself.
          std::uint64_t below = ub & down[m].w[k];
          if (k == m / 64) below &= ~(std::uint64_t{1} << (m % 64));
          if (below) minimal = false;
        }
      } else {
        for (std::size_t k = 0; k < n; ++k) {
          if (!up[i].test(k) || !up[j].test(k)) continue;
          bool j_le_k = is_subtype(ji, types[k]);
          if (!j_le_k) least = false;
          if (!j_le_k && is_subtype(types[k], ji)) minimal = false;
        }
      }
      if (!least) {
        ++tl.not_least;
        no_sup[i].set(j);
        no_sup[j].set(i);
      }
      if (!minimal) ++tl.not_minimal;
    }

  auto assoc = [&](std::size_t a, std::size_t b, std::size_t c) {
    ++tl.triples;
    TypeTriple l = join(join(types[a], types[b]), types[c]);
    TypeTriple r = join(types[a], join(types[b], types[c]));
    if (type_equiv(l, r)) return;
    ++tl.not_assoc;
    bool bounds = true;
    for (std::size_t k : {a, b, c})
      bounds = bounds && is_subtype(types[k], l) && is_subtype(types[k], r);
    if (!bounds || !(no_sup[a].test(b) || no_sup[b].test(c))) ++tl.assoc_unexplained;
  };
  if (all_triples) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c) assoc(a, b, c);
  } else {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int k = 0; k < 200000; ++k) assoc(pick(rng), pick(rng), pick(rng));
  }
}

// Join laws and subtype against the declarative oracle on three exhaustive
// universes over one field: one variable with up to 3 nodes (all triples),
// two variables with up to 3 nodes and three variables with up to 2 nodes
// (all pairs, sampled triples).
Outcome lattice_laws() {
  auto t0 = Clock::now();
  LatticeTally tl;
  check_universe({"x"}, 3, tl, true);
  check_universe({"x", "y"}, 3, tl, false);
  check_universe({"x", "y", "z"}, 2, tl, false);
  std::ostringstream d;
  d << tl.types << " types, " << tl.pairs << " pairs, " << tl.triples
    << " triples: subtype/oracle disagreements " << tl.subtype_mismatch
    << ", distinct canonical forms subtyping both ways " << tl.equiv_mismatch
    << ", upper-bound failures " << tl.not_upper << ", commutativity failures "
    << tl.not_comm << ", leastness failures " << tl.not_least
    << " (join not minimal on " << tl.not_minimal << ")"
    << ", associativity failures " << tl.not_assoc << " (not traced to a pair "
    << "without supremum: " << tl.assoc_unexplained << ")";
  if (tl.not_least > 0 && tl.not_minimal == 0 && tl.assoc_unexplained == 0)
    d << "; every leastness failure is a pair with incomparable minimal upper "
         "bounds, e.g. x->strong n1 vs y->strong n1 (separate weak nodes vs "
         "one aliased strong node), so no join can be least there";
  d << "; time " << seconds_since(t0) << " s";
  bool ok = tl.subtype_mismatch == 0 && tl.equiv_mismatch == 0 && tl.not_upper == 0 &&
            tl.not_comm == 0 && tl.not_least == 0 && tl.not_assoc == 0;
  return {ok, d.str()};
}

Outcome gc_equivalence() {
  std::mt19937_64 rng(11);
  const std::vector<std::string> vars{"x", "y", "z"};
  const std::vector<std::string> fields{"f", "g"};
  long idem_fail = 0, wf_fail = 0, lemma_fail = 0, pairs = 0;
  std::vector<TypeTriple> sample;
  for (int i = 0; i < 10000; ++i) {
    TypeTriple t = oracle::random_type(rng, vars, fields, 4);
    TypeTriple g = gc_canonicalize(t);
    if (!(gc_canonicalize(g) == g)) ++idem_fail;
    if (!well_formed(g)) ++wf_fail;
    // A renamed copy is equivalent; both relations must say so.
    TypeTriple r = oracle::rename_nodes(t, rng);
    ++pairs;
    if (!(is_subtype(t, r) && is_subtype(r, t)) || !type_equiv(t, r)) ++lemma_fail;
    sample.push_back(std::move(g));
  }
  // Mutual subtyping against canonical equality on random pairs.
  for (int k = 0; k < 200000; ++k) {
    const auto& a = sample[static_cast<std::size_t>(k) % sample.size()];
    const auto& b = sample[(static_cast<std::size_t>(k) * 7919 + 13) % sample.size()];
    ++pairs;
    bool mutual = is_subtype(a, b) && is_subtype(b, a);
    if (mutual != type_equiv(a, b)) ++lemma_fail;
  }
  std::ostringstream d;
  d << "10000 random types: idempotence failures " << idem_fail
    << ", ill-formed outputs " << wf_fail << "; " << pairs
    << " pairs: equivalence/canonical-equality disagreements " << lemma_fail;
  return {idem_fail == 0 && wf_fail == 0 && lemma_fail == 0, d.str()};
}

std::size_t reachable_nodes(const TypeTriple& t) {
  return gc_canonicalize(t).delta.size();
}

// A list builder of depth d: a loop that allocates d cells per iteration,
// chains them onto x and advances x.
std::string list_builder(int d) {
  std::ostringstream s;
  s << "class C {\n  fields: f;\n  policy default {}\n"
    << "  copy(default) build(y) {\n    x := null;\n    while {\n";
  for (int i = 1; i <= d; ++i) {
    s << "      t" << i << " := new C;\n";
    s << "      t" << i << ".f := " << (i == 1 ? "x" : "t" + std::to_string(i - 1))
      << ";\n";
  }
  s << "      x := t" << d << ";\n    }\n    return x;\n  }\n}\n";
  return s.str();
}

Outcome widening_termination() {
  std::ostringstream d;
  bool ok = true;
  std::size_t worst = 0;
  for (int depth = 1; depth <= 10; ++depth) {
    Program p = resolve_program(parse_program({"builder.cp", list_builder(depth)}));
    const ClassDecl& cl = p.cls("C");
    const MethodDecl& md = cl.methods.at("build");
    MethodVerdict v = check_method(p, cl, md);
    const Command* w = first_while(md.body);
    if (v.reason && v.reason->rule == "IterationCap") ok = false;
    if (!w || !v.points.types.count(w->point)) {
      ok = false;
      continue;
    }
    std::size_t nodes = reachable_nodes(v.points.types.at(w->point).after);
    worst = std::max(worst, nodes);
    if (nodes > 2 * md.local_vars.size()) ok = false;
    if (v.points.loop_iterations.at(w->point) > iteration_cap(md.local_vars.size()))
      ok = false;
  }
  d << "builders of depth 1..10 terminate, max invariant nodes " << worst << "; ";
  long loops = 0;
  bool capped = false;
  for (const auto& f : {"list.cp", "evillist.cp", "linkedlist.cp", "reject_nonlocal.cp"}) {
    Program p = load(f);
    for (const auto& mv : check_program(p).methods) {
      if (mv.reason && mv.reason->rule == "IterationCap") capped = true;
      const MethodDecl& md = p.cls(mv.cls).methods.at(mv.method);
      for (const auto& [pt, it] : mv.points.loop_iterations) {
        ++loops;
        if (it > iteration_cap(md.local_vars.size())) capped = true;
      }
    }
  }
  d << "corpus loops " << loops << ", cap hit " << (capped ? "yes" : "no");
  return {ok && !capped, d.str()};
}

Program program_of(const std::string& text) {
  return resolve_program(parse_program({"pol.cp", text}));
}

Outcome policy_oracle() {
  // One field per class keeps the exhaustive enumeration small; the
  // second program adds inheritance and several deep fields per object.
  Program narrow = program_of(
      "class A {\n"
      "  fields: f;\n"
      "  policy default { deep(default) f; }\n"
      "  policy Mix { deep(B.default) f; }\n"
      "  policy None {}\n"
      "}\n"
      "class B {\n"
      "  fields: g;\n"
      "  policy default { deep(A.Mix) g; }\n"
      "}\n");
  Program wide = program_of(
      "class A {\n"
      "  fields: f, g;\n"
      "  policy default { deep(default) f; }\n"
      "  policy Both { deep(Both) f; deep(B.default) g; }\n"
      "  policy None {}\n"
      "}\n"
      "class B extends A {\n"
      "  fields: h;\n"
      "  policy default { deep(A.Both) h; deep(default) g; }\n"
      "}\n");
  long heaps = 0, disagreements = 0;
  auto compare = [&](const Program& p, const ConcreteState& s) {
    ++heaps;
    for (const auto& [id, pol] : p.policies())
      if (policy_holds(s.env, s.heap, "x", pol, p) !=
          oracle::policy_holds(s.env, s.heap, "x", pol, p))
        ++disagreements;
  };
  const auto& cs = narrow.classes();
  // Every heap of up to 4 locations, with every binding of x and y.
  for (int n = 0; n <= 4; ++n) {
    for (int cls_bits = 0; cls_bits < (1 << n); ++cls_bits) {
      ConcreteState s;
      for (int i = 0; i < n; ++i) s.heap.push_back(null_object(cs[(cls_bits >> i) & 1]));
      s.env["x"] = Value::null();
      s.env["y"] = Value::null();
      std::vector<Value*> slots;
      for (auto& o : s.heap)
        for (auto& [f, v] : o.fields) slots.push_back(&v);
      slots.push_back(&s.env["x"]);
      slots.push_back(&s.env["y"]);
      std::vector<int> digit(slots.size(), -1);
      while (true) {
        for (std::size_t k = 0; k < slots.size(); ++k)
          *slots[k] = digit[k] < 0 ? Value::null() : Value::at(digit[k]);
        compare(narrow, s);
        std::size_t k = 0;
        for (; k < digit.size(); ++k) {
          if (++digit[k] < n) break;
          digit[k] = -1;
        }
        if (k == digit.size()) break;
      }
    }
  }
  long exhaustive = heaps;
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100000; ++k) {
    ConcreteState s = oracle::random_state(wide, {"x", "y", "z"}, 6, rng);
    compare(wide, s);
  }
  std::ostringstream d;
  d << exhaustive << " exhaustive heaps (<= 4 locations) and " << heaps - exhaustive
    << " random heaps (<= 6 locations), 2 classes each: " << disagreements
    << " disagreements";
  return {disagreements == 0, d.str()};
}

}  // namespace

int main() {
  report(1, corpus_verdicts());
  report(2, linkedlist_types());
  FuzzTotals totals = fuzz_corpus();
  report(3, soundness_fuzz(totals));
  report(4, subject_reduction(totals));
  report(5, lattice_laws());
  report(6, gc_equivalence());
  report(7, widening_termination());
  report(8, policy_oracle());
  std::printf(
      "criterion 9: NOT REPRODUCIBLE (declared)  the large-corpus scan figures "
      "need Java bytecode ingestion, which this tool does not do; criteria 3-8 "
      "stand in for them\n");
  std::printf("%s\n", failures == 0 ? "ACCEPTANCE: all reproducible criteria pass"
                                    : "ACCEPTANCE: FAILED");
  return failures == 0 ? 0 : 1;
}
