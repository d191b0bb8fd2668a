#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "clonecheck/cli.hpp"
#include "support.hpp"

using namespace clonecheck;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "clonecheck");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("clonecheck_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

std::string corpus(const char* name) { return testing_support::corpus_path(name); }

const char* kTwoMethods =
    "class A { fields: f; policy d { deep(d) f; }\n"
    "  copy(d) same(x) { return x; }\n"
    "  copy(d) deref(x) { v := x.f; w := v.f; r := new A; return r; } }\n";

}  // namespace

TEST_F(Cli, CheckExitCodes) {
  EXPECT_EQ(invoke({"check", corpus("list.cp")}).code, 0);
  Result bad = invoke({"check", corpus("reject_nonlocal.cp")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("NonLocalWrite"), std::string::npos) << bad.out;
  EXPECT_NE(bad.out.find("reject_nonlocal.cp:9:"), std::string::npos) << bad.out;
  EXPECT_EQ(invoke({"check", (dir_ / "missing.cp").string()}).code, 2);
  Result syn = invoke({"check", write("syn.cp", "class A { fields: f; ")});
  EXPECT_EQ(syn.code, 2);
  EXPECT_NE(syn.err.find("syn.cp:1:"), std::string::npos) << syn.err;
  EXPECT_EQ(invoke({"check", write("res.cp", "class A extends B { fields: f; }")}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
}

TEST_F(Cli, CheckJson) {
  Result r = invoke({"check", corpus("list.cp"), "--json"});
  ASSERT_EQ(r.code, 0);
  json j = json::parse(r.out);
  EXPECT_EQ(j["schemaVersion"], 1);
  EXPECT_EQ(j["summary"]["methods"], 3);
  EXPECT_EQ(j["summary"]["accepted"], 3);
  for (const auto& m : j["methods"]) {
    EXPECT_TRUE(m["accepted"].get<bool>());
    EXPECT_EQ(parse_type(m["finalType"].get<std::string>()).gamma.count("ret"), 1u);
  }
  Result e = invoke({"check", write("res.cp", "class A extends B { fields: f; }"), "--json"});
  EXPECT_EQ(e.code, 2);
  json ej = json::parse(e.out);
  EXPECT_EQ(ej["schemaVersion"], 1);
  EXPECT_EQ(ej["error"]["kind"], "UnknownClass");
}

TEST_F(Cli, DumpTypes) {
  Result a = invoke({"dump-types", corpus("linkedlist.cp")});
  Result b = invoke({"check", "--dump-types", corpus("linkedlist.cp")});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("before: type {"), std::string::npos);
  EXPECT_NE(a.out.find("iterations)"), std::string::npos);
  json j = json::parse(invoke({"dump-types", corpus("list.cp"), "--json"}).out);
  EXPECT_FALSE(j["methods"][0]["points"].empty());
}

TEST_F(Cli, RunExitCodesAndDeterminism) {
  std::string path = write("two.cp", kTwoMethods);
  Result a = invoke({"run", corpus("list.cp"), "--entry", "List::clone", "--seed", "9", "--dump"});
  Result b = invoke({"run", corpus("list.cp"), "--entry", "List::clone", "--seed", "9", "--dump"});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("verdict: Holds"), std::string::npos) << a.out;

  Result v = invoke({"run", path, "--entry", "A::same", "--seed", "1"});
  EXPECT_EQ(v.code, 1);
  EXPECT_NE(v.out.find("verdict: Violation"), std::string::npos);

  // Heap size 1: the receiver's field is null or itself; seeds where it is
  // null get stuck one frame down.
  bool saw_stuck = false;
  for (int seed = 0; seed < 20 && !saw_stuck; ++seed) {
    Result s = invoke({"run", path, "--entry", "A::deref", "--seed", std::to_string(seed),
                    "--heap-size", "1"});
    if (s.code == 3) {
      saw_stuck = true;
      EXPECT_NE(s.out.find("stuck: NullDereference in A::deref at 3:"), std::string::npos) << s.out;
    } else {
      EXPECT_EQ(s.code, 0);
    }
  }
  EXPECT_TRUE(saw_stuck);

  // An empty caller heap: the call itself is stuck, which is vacuous.
  Result z = invoke({"run", corpus("list.cp"), "--entry", "List::clone", "--heap-size", "0", "--json"});
  EXPECT_EQ(z.code, 0);
  json j = json::parse(z.out);
  EXPECT_EQ(j["schemaVersion"], 1);
  EXPECT_EQ(j["verdict"], "Vacuous");
  EXPECT_EQ(j["outcome"], "Stuck");

  EXPECT_EQ(invoke({"run", path, "--entry", "A::nope"}).code, 2);
  EXPECT_EQ(invoke({"run", path}).code, 2);
}

TEST_F(Cli, SeedEnvironmentOverridesFlag) {
  Result direct = invoke({"run", corpus("list.cp"), "--entry", "List::deepClone", "--seed", "77", "--dump"});
  ::setenv("CLONECHECK_SEED", "77", 1);
  Result env = invoke({"run", corpus("list.cp"), "--entry", "List::deepClone", "--seed", "3", "--dump"});
  ::setenv("CLONECHECK_SEED", "x", 1);
  Result bad = invoke({"run", corpus("list.cp"), "--entry", "List::deepClone"});
  ::unsetenv("CLONECHECK_SEED");
  EXPECT_EQ(env.out, direct.out);
  EXPECT_EQ(bad.code, 2);
}

TEST_F(Cli, FuzzCleanCorpus) {
  Result r = invoke({"fuzz", corpus("list.cp"), "--runs", "100", "--json", "--out", dir_.string()});
  EXPECT_EQ(r.code, 0) << r.out;
  json j = json::parse(r.out);
  EXPECT_EQ(j["schemaVersion"], 1);
  EXPECT_FALSE(j["violation"].get<bool>());
  EXPECT_TRUE(j["subjectReduction"]["sampled"].get<bool>());
  EXPECT_EQ(j["subjectReduction"]["failed"], 0);
  EXPECT_GT(j["subjectReduction"]["checked"].get<long>(), 0);
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(Cli, FuzzMutantWritesReproducer) {
  std::string fixture = testing_support::fixture_path("mutant_box.cp");
  EXPECT_EQ(invoke({"fuzz", fixture, "--runs", "300", "--out", dir_.string()}).code, 0);
  Result r = invoke({"fuzz", fixture, "--runs", "300", "--strong-update-on-weak", "--json",
                  "--out", dir_.string()});
  ASSERT_EQ(r.code, 1) << r.out;
  json j = json::parse(r.out);
  EXPECT_TRUE(j["violation"].get<bool>());
  const json& ce = j["methods"][0]["counterexample"];
  std::string file = ce["file"];
  ASSERT_TRUE(fs::exists(file));
  // The reproducer is a valid program and replays the violation.
  Result replay = invoke({"run", file, "--entry", "Box::clone", "--seed",
                       std::to_string(ce["seed"].get<std::uint64_t>()), "--heap-size",
                       std::to_string(ce["heapSize"].get<int>())});
  EXPECT_EQ(replay.code, 1) << replay.out;
}
