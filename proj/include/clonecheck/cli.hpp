#pragma once

// Command-line front end. `run_cli` is the whole tool; main() only
// forwards to it so tests can drive every command in-process.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "clonecheck/abstract.hpp"
#include "clonecheck/fuzz.hpp"
#include "clonecheck/infer.hpp"
#include "clonecheck/interp.hpp"
#include "clonecheck/lang.hpp"
#include "clonecheck/parser.hpp"
#include "clonecheck/paths.hpp"

namespace clonecheck {

namespace cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct Loaded {
  SyntaxTree tree;
  Program program;
};

inline const Command* find_point(const Command& c, int point) {
  if (c.point == point) return &c;
  for (const auto& ch : c.children)
    if (const Command* r = find_point(ch, point)) return r;
  return nullptr;
}

inline void collect_points(const Command& c, std::vector<const Command*>& out) {
  out.push_back(&c);
  for (const auto& ch : c.children) collect_points(ch, out);
}

inline json rejection_json(const Rejection& r) {
  return {{"rule", r.rule},
          {"point", r.point},
          {"line", r.pos.line},
          {"col", r.pos.column},
          {"message", r.message}};
}

inline json point_types_json(const MethodDecl& md, const MethodVerdict& v) {
  json pts = json::array();
  std::vector<const Command*> cmds;
  collect_points(md.body, cmds);
  for (const Command* c : cmds) {
    auto it = v.points.types.find(c->point);
    if (it == v.points.types.end()) continue;
    json j = {{"point", c->point},
              {"line", c->pos.line},
              {"col", c->pos.column},
              {"command", command_text(*c)},
              {"before", type_text(gc_canonicalize(it->second.before))},
              {"after", type_text(gc_canonicalize(it->second.after))}};
    auto li = v.points.loop_iterations.find(c->point);
    if (li != v.points.loop_iterations.end()) j["iterations"] = li->second;
    pts.push_back(std::move(j));
  }
  return pts;
}

class Tool {
 public:
  Tool(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int check(const std::string& path, bool dump_types, bool as_json,
            const InferOptions& opt) {
    auto loaded = load(path, as_json);
    if (!loaded) return 2;
    const Program& p = loaded->program;
    ProgramReport rep = check_program(p, opt);
    if (as_json) {
      json methods = json::array();
      for (const auto& v : rep.methods) {
        json m = {{"class", v.cls},
                  {"method", v.method},
                  {"policy", v.policy},
                  {"accepted", v.accepted},
                  {"reason", v.reason ? rejection_json(*v.reason) : json()},
                  {"finalType", v.final_type
                                    ? json(type_text(gc_canonicalize(*v.final_type)))
                                    : json()}};
        if (dump_types)
          m["points"] = point_types_json(p.cls(v.cls).methods.at(v.method), v);
        methods.push_back(std::move(m));
      }
      json ov = json::array();
      for (const auto& o : rep.overriding)
        ov.push_back({{"baseClass", o.base_class},
                      {"derivedClass", o.derived_class},
                      {"method", o.method},
                      {"basePolicy", o.base_policy},
                      {"derivedPolicy", o.derived_policy}});
      json j = {{"schemaVersion", kSchemaVersion},
                {"programPath", path},
                {"methods", methods},
                {"overridingViolations", ov},
                {"summary",
                 {{"methods", rep.methods.size()},
                  {"accepted", rep.accepted()},
                  {"rejected", rep.methods.size() - rep.accepted()},
                  {"overridingViolations", rep.overriding.size()}}}};
      out_ << j.dump(2) << "\n";
    } else {
      for (const auto& o : rep.overriding)
        out_ << path << ": overriding violation: " << o.derived_class
             << "::" << o.method << " [" << o.derived_policy
             << "] does not include " << o.base_class << "::" << o.method
             << " [" << o.base_policy << "]\n";
      for (const auto& v : rep.methods) {
        if (v.accepted) {
          out_ << path << ": " << v.cls << "::" << v.method << " [" << v.policy
               << "] accepted\n";
        } else {
          const Rejection& r = *v.reason;
          out_ << path << ":" << r.pos.line << ":" << r.pos.column << ": "
               << v.cls << "::" << v.method << " [" << v.policy
               << "] rejected: " << r.rule << ": " << r.message << "\n";
        }
        if (dump_types) dump_points(p.cls(v.cls).methods.at(v.method), v);
      }
      out_ << "summary: " << rep.methods.size() << " methods, "
           << rep.accepted() << " accepted, "
           << rep.methods.size() - rep.accepted() << " rejected, "
           << rep.overriding.size() << " overriding violations\n";
    }
    return rep.all_accepted() ? 0 : 1;
  }

  int run(const std::string& path, const std::string& entry,
          std::uint64_t seed, long fuel, int heap_size, bool dump,
          bool as_json) {
    auto loaded = load(path, as_json);
    if (!loaded) return 2;
    const Program& p = loaded->program;
    const MethodDecl* md = resolve_entry(p, entry, as_json);
    if (!md) return 2;
    ConcreteState caller;
    CallResult r = fuzz_one(p, *md, seed, heap_size, fuel, &caller);
    const RunOutcome& o = r.outcome;
    bool stuck_in_callee = o.stuck() && o.depth > 0;
    std::string diag;
    if (o.stuck()) {
      diag = std::string(to_string(o.reason)) + " in " +
             (o.method.empty() ? std::string("caller") : o.method);
      if (!o.method.empty()) {
        auto sep = o.method.find("::");
        const MethodDecl& m =
            p.lookup(o.method.substr(0, sep), o.method.substr(sep + 2));
        if (const Command* c = find_point(m.body, o.point))
          diag += " at " + std::to_string(c->pos.line) + ":" +
                  std::to_string(c->pos.column) + " (" + command_text(*c) + ")";
      }
    }
    const char* kind = o.final() ? "Final" : o.stuck() ? "Stuck" : "FuelExhausted";
    if (as_json) {
      json j = {{"schemaVersion", kSchemaVersion},
                {"programPath", path},
                {"entry", md->owner + "::" + md->name},
                {"policy", md->policy},
                {"seed", seed},
                {"heapSize", heap_size},
                {"outcome", kind},
                {"verdict", to_string(r.verdict)},
                {"final", dump_state(o.state)}};
      if (dump) j["caller"] = dump_state(caller);
      if (o.stuck()) j["stuck"] = diag;
      out_ << j.dump(2) << "\n";
    } else {
      out_ << "entry: " << md->owner << "::" << md->name << " [" << md->policy
           << "]\nseed: " << seed << "\n";
      if (dump) out_ << "caller:\n" << dump_state(caller);
      out_ << "outcome: " << kind << "\n";
      if (o.stuck()) out_ << "stuck: " << diag << "\n";
      out_ << "final:\n" << dump_state(o.state);
      out_ << "verdict: " << to_string(r.verdict) << "\n";
    }
    if (stuck_in_callee) return 3;
    return r.verdict == Verdict::Violation ? 1 : 0;
  }

  int fuzz(const std::string& path, const FuzzOptions& fopt,
           const InferOptions& iopt, const std::string& out_dir,
           bool as_json) {
    auto loaded = load(path, as_json);
    if (!loaded) return 2;
    const Program& p = loaded->program;
    ProgramReport rep = check_program(p, iopt);

    // Subject reduction is sampled only when every method has per-point
    // types, since callees run inside the sampled executions.
    SubjectReduction sr;
    const bool sample_sr = rep.all_accepted();
    std::vector<const MethodDecl*> targets;
    for (const auto& v : rep.methods) {
      const MethodDecl& md = p.cls(v.cls).methods.at(v.method);
      if (v.accepted) targets.push_back(&md);
      if (sample_sr) sr.add(&md, &v.points);
    }
    json methods = json::array();
    bool violated = false;
    for (const MethodDecl* md : targets) {
      FuzzStats st = fuzz_method(p, *md, fopt, sample_sr ? &sr : nullptr);
      std::string name = md->owner + "::" + md->name;
      json m = {{"method", name},
                {"policy", md->policy},
                {"runs", fopt.runs},
                {"holds", st.holds},
                {"violations", st.violations},
                {"vacuous", st.vacuous}};
      if (!as_json)
        out_ << name << " [" << md->policy << "]: " << fopt.runs << " runs, "
             << st.holds << " holds, " << st.violations << " violations, "
             << st.vacuous << " vacuous\n";
      if (st.first_violation) {
        violated = true;
        FuzzCase c = minimize_violation(p, *md, *st.first_violation, fopt.fuel);
        std::string file = write_reproducer(loaded->tree, path, *md, c, out_dir);
        m["counterexample"] = {{"file", file},
                               {"seed", c.seed},
                               {"heapSize", c.heap_size}};
        if (!as_json)
          out_ << "  violation: seed " << c.seed << " heap-size " << c.heap_size
               << ", reproducer written to " << file << "\n";
      }
      methods.push_back(std::move(m));
    }
    if (sr.failed() > 0) violated = true;
    if (as_json) {
      json fails = json::array();
      for (const auto& f : sr.failures())
        fails.push_back({{"method", f.method},
                         {"point", f.point},
                         {"command", f.command},
                         {"typeBefore", type_text(gc_canonicalize(f.type_before))},
                         {"typeAfter", type_text(gc_canonicalize(f.type_after))},
                         {"stateBefore", dump_state(f.before)},
                         {"stateAfter", dump_state(f.after)}});
      json j = {{"schemaVersion", kSchemaVersion},
                {"programPath", path},
                {"seed", fopt.seed},
                {"methods", methods},
                {"subjectReduction",
                 {{"sampled", sample_sr},
                  {"checked", sr.checked()},
                  {"failed", sr.failed()},
                  {"failures", fails}}},
                {"violation", violated}};
      out_ << j.dump(2) << "\n";
    } else {
      if (sample_sr) {
        out_ << "subject reduction: " << sr.checked() << " checked, "
             << sr.failed() << " failed\n";
        for (const auto& f : sr.failures())
          out_ << "  " << f.method << " point " << f.point << " ("
               << f.command << ")\n    before: "
               << type_text(gc_canonicalize(f.type_before))
               << "\n    after: " << type_text(gc_canonicalize(f.type_after))
               << "\n";
      } else {
        out_ << "subject reduction: not sampled (some methods rejected)\n";
      }
      out_ << (violated ? "result: violation found\n" : "result: clean\n");
    }
    return violated ? 1 : 0;
  }

 private:
  std::optional<Loaded> load(const std::string& path, bool as_json) {
    try {
      SourceFile src = read_source_file(path);
      SyntaxTree tree = parse_program(src);
      Program prog = resolve_program(tree);
      return Loaded{std::move(tree), std::move(prog)};
    } catch (const SyntaxError& e) {
      fail(as_json, "SyntaxError", e.what());
    } catch (const ResolveError& e) {
      fail(as_json, to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
      fail(as_json, "IOError", e.what());
    }
    return std::nullopt;
  }

  void fail(bool as_json, const std::string& kind, const std::string& msg) {
    if (as_json)
      out_ << json{{"schemaVersion", kSchemaVersion},
                   {"error", {{"kind", kind}, {"message", msg}}}}
                  .dump(2)
           << "\n";
    err_ << msg << "\n";
  }

  const MethodDecl* resolve_entry(const Program& p, const std::string& entry,
                                  bool as_json) {
    auto sep = entry.find("::");
    if (sep != std::string::npos) {
      std::string cn = entry.substr(0, sep);
      if (p.find_class(cn))
        if (const MethodDecl* md = p.find_method(cn, entry.substr(sep + 2)))
          return md;
    }
    fail(as_json, "MethodNotFound", "no entry method " + entry);
    return nullptr;
  }

  std::string write_reproducer(const SyntaxTree& tree, const std::string& path,
                               const MethodDecl& md, const FuzzCase& c,
                               const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    fs::create_directories(dir);
    fs::path file = dir / (fs::path(path).stem().string() + "." + md.owner +
                           "." + md.name + ".seed" + std::to_string(c.seed) +
                           ".cp");
    std::ofstream os(file);
    os << "// clonecheck fuzz counterexample\n"
       << "// entry: " << md.owner << "::" << md.name << " [" << md.policy << "]\n"
       << "// seed: " << c.seed << "\n"
       << "// heap-size: " << c.heap_size << "\n"
       << "// replay: clonecheck run " << file.filename().string()
       << " --entry " << md.owner << "::" << md.name << " --seed " << c.seed
       << " --heap-size " << c.heap_size << " --dump\n";
    std::istringstream caller(dump_state(c.caller));
    for (std::string line; std::getline(caller, line);)
      os << "// caller " << line << "\n";
    os << "\n" << pretty_print(tree);
    return file.string();
  }

  void dump_points(const MethodDecl& md, const MethodVerdict& v) {
    std::vector<const Command*> cmds;
    collect_points(md.body, cmds);
    for (const Command* c : cmds) {
      auto it = v.points.types.find(c->point);
      if (it == v.points.types.end()) continue;
      out_ << "  p" << c->point << " " << c->pos.line << ":" << c->pos.column
           << " " << command_text(*c);
      auto li = v.points.loop_iterations.find(c->point);
      if (li != v.points.loop_iterations.end())
        out_ << " (" << li->second << " iterations)";
      out_ << "\n    before: " << type_text(gc_canonicalize(it->second.before))
           << "\n    after:  " << type_text(gc_canonicalize(it->second.after))
           << "\n";
    }
  }

  std::ostream& out_;
  std::ostream& err_;
};

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Static checker for secure copy policies"};
  app.require_subcommand(1);

  std::string path;
  bool as_json = false;
  bool dump_types = false;
  bool strong_weak = false;
  std::string entry;
  std::uint64_t seed = 1;
  long fuel = 10000;
  int heap_size = 8;
  int runs = 200;
  bool dump = false;
  std::string out_dir = ".";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("path", path, "program file (.cp)")->required();
    sub->add_flag("--json", as_json, "machine-readable output");
  };

  CLI::App* check = app.add_subcommand("check", "verify every copy method");
  add_common(check);
  check->add_flag("--dump-types", dump_types, "print the type at every program point");
  check->add_flag("--strong-update-on-weak", strong_weak)->group("");

  CLI::App* dump_cmd = app.add_subcommand("dump-types", "same as check --dump-types");
  add_common(dump_cmd);

  CLI::App* run = app.add_subcommand("run", "execute one copy call on a random caller heap");
  add_common(run);
  run->add_option("--entry", entry, "method as Class::name")->required();
  run->add_option("--seed", seed, "random seed");
  run->add_option("--fuel", fuel, "step budget");
  run->add_option("--heap-size", heap_size, "maximum caller heap size");
  run->add_flag("--dump", dump, "also print the caller state");

  CLI::App* fuzz = app.add_subcommand("fuzz", "soundness fuzzing of accepted methods");
  add_common(fuzz);
  fuzz->add_option("--runs", runs, "runs per method");
  fuzz->add_option("--seed", seed, "base seed");
  fuzz->add_option("--heap-size", heap_size, "maximum caller heap size");
  fuzz->add_option("--fuel", fuel, "step budget per run");
  fuzz->add_option("--out", out_dir, "directory for counterexample files");
  fuzz->add_flag("--strong-update-on-weak", strong_weak)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (const char* env = std::getenv("CLONECHECK_SEED")) {
    try {
      seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "CLONECHECK_SEED is not a number: " << env << "\n";
      return 2;
    }
  }

  InferOptions iopt;
  iopt.strong_update_on_weak = strong_weak;
  cli::Tool tool(out, err);
  if (check->parsed()) return tool.check(path, dump_types, as_json, iopt);
  if (dump_cmd->parsed()) return tool.check(path, true, as_json, iopt);
  if (run->parsed())
    return tool.run(path, entry, seed, fuel, heap_size, dump, as_json);
  FuzzOptions fopt;
  fopt.runs = runs;
  fopt.seed = seed;
  fopt.heap_size = heap_size;
  fopt.fuel = fuel;
  return tool.fuzz(path, fopt, iopt, out_dir, as_json);
}

}  // namespace clonecheck
