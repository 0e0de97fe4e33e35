#include <gtest/gtest.h>

#include <chrono>

#include "aupair/error.hpp"
#include "aupair/evaluator.hpp"
#include "aupair/process.hpp"
#include "support.hpp"

using namespace aupair;
using namespace std::chrono_literals;

namespace {

Evaluator make_evaluator(EvaluatorOptions opts = {}) {
  return Evaluator({{aupair::testing::python(), aupair::testing::stub_runner()}}, opts);
}

Problem with_tests(std::vector<TestCase> tests) {
  Problem p;
  p.id = "p";
  p.description = "d";
  p.tests = std::move(tests);
  return p;
}

}  // namespace

TEST(Normalize, Rules) {
  EXPECT_EQ(normalize_output(" 5 \n\n"), " 5");
  EXPECT_EQ(normalize_output("a\r\nb\r\n"), "a\nb");
  EXPECT_EQ(normalize_output(""), "");
  EXPECT_EQ(normalize_output("x\t \ny  "), "x\ny");
  EXPECT_EQ(normalize_output("\n\n"), "");
}

TEST(Normalize, NumericTolerance) {
  EXPECT_TRUE(numeric_equal("1.0000001 2", "1 2", 1e-6));
  EXPECT_FALSE(numeric_equal("1.1 2", "1 2", 1e-6));
  EXPECT_FALSE(numeric_equal("1 2 3", "1 2", 1e-6));
  EXPECT_TRUE(numeric_equal("yes 3", "yes 3.0", 1e-9));
  EXPECT_FALSE(numeric_equal("yes 3", "no 3", 1e-9));
}

TEST(Process, CapturesOutputAndExitCode) {
  auto r = run_process({"sh", "-c", "printf hi; printf err >&2; exit 3"}, 5s, 1024);
  EXPECT_EQ(r.stdout_data, "hi");
  EXPECT_EQ(r.stderr_data, "err");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_FALSE(r.timed_out);
}

TEST(Process, TimeoutKillsGroup) {
  const auto start = std::chrono::steady_clock::now();
  auto r = run_process({"sh", "-c", "sleep 30 & sleep 30"}, 300ms, 1024);
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(Process, OutputCap) {
  auto r = run_process({"sh", "-c", "yes"}, 5s, 4096);
  EXPECT_TRUE(r.output_limit_exceeded);
  EXPECT_LE(r.stdout_data.size(), 4096u);
}

TEST(Process, MissingProgramIsEnvironmentError) {
  EXPECT_THROW(run_process({"/nonexistent/program"}, 1s, 10), EnvironmentError);
}

TEST(Evaluator, MissingRunnerIsEnvironmentError) {
  EXPECT_THROW(Evaluator({{"/nonexistent/runner"}}), EnvironmentError);
}

TEST(Evaluator, EchoPasses) {
  auto ev = make_evaluator();
  auto out = ev.score_code("def solve(s):\n    print(s)\n", with_tests({{"x", "x"}}));
  EXPECT_EQ(out.verdicts, std::vector<Verdict>{Verdict::pass});
  EXPECT_DOUBLE_EQ(out.score, 1.0);
}

TEST(Evaluator, CrashEverywhere) {
  auto ev = make_evaluator();
  auto out = ev.score_code("def solve(s):\n    raise ValueError(s)\n",
                           with_tests({{"1", "1"}, {"2", "2"}, {"3", "3"}, {"4", "4"}}));
  EXPECT_EQ(out.verdicts, std::vector<Verdict>(4, Verdict::runtime_error));
  EXPECT_DOUBLE_EQ(out.score, 0.0);
}

TEST(Evaluator, ThreeOfFour) {
  auto ev = make_evaluator({.limits = {}, .parallelism = 4});
  const std::string code =
      "def solve(s):\n"
      "    n = int(s)\n"
      "    print(n * 2 if n != 3 else -1)\n";
  auto problem = with_tests({{"1", "2\n"}, {"2", "4\n"}, {"3", "6\n"}, {"4", "8\n"}});
  auto out = ev.score_code(code, problem);
  EXPECT_EQ(out.verdicts, (std::vector<Verdict>{Verdict::pass, Verdict::pass,
                                                Verdict::wrong_output, Verdict::pass}));
  EXPECT_DOUBLE_EQ(out.score, 0.75);
  EXPECT_EQ(ev.score_code(code, problem), out);  // deterministic
}

TEST(Evaluator, ProtocolErrors) {
  auto ev = make_evaluator();
  auto problem = with_tests({{"x", "x"}});
  EXPECT_EQ(ev.score_code("def other(s):\n    pass\n", problem).verdicts[0], Verdict::protocol_error);
  EXPECT_EQ(ev.score_code("def solve(s:\n", problem).verdicts[0], Verdict::protocol_error);
  EXPECT_EQ(ev.score_code("import os\ndef solve(s):\n    os._exit(7)\n", problem).verdicts[0],
            Verdict::protocol_error);
}

TEST(Evaluator, TimeoutIsolatedToOneTest) {
  auto ev = make_evaluator({.limits = {.wall_timeout = 500ms, .max_output_bytes = 1 << 20}});
  const std::string code =
      "import time\n"
      "def solve(s):\n"
      "    while s.strip() == 'loop':\n"
      "        time.sleep(1)\n"
      "    print(s)\n";
  auto out = ev.score_code(code, with_tests({{"loop", "loop"}, {"a", "a"}, {"b", "b"}}));
  EXPECT_EQ(out.verdicts, (std::vector<Verdict>{Verdict::timeout, Verdict::pass, Verdict::pass}));
}

TEST(Evaluator, OutputLimitFailsOnlyThatTest) {
  auto ev = make_evaluator({.limits = {.wall_timeout = 5000ms, .max_output_bytes = 1000}});
  const std::string code =
      "def solve(s):\n"
      "    print('x' * (5000 if s == 'big' else 1))\n";
  auto out = ev.score_code(code, with_tests({{"big", "x"}, {"small", "x"}}));
  EXPECT_EQ(out.verdicts, (std::vector<Verdict>{Verdict::runtime_error, Verdict::pass}));
}

TEST(Evaluator, NumericToleranceOptIn) {
  const std::string code = "def solve(s):\n    print(1/3)\n";
  auto problem = with_tests({{"", "0.333333"}});
  EXPECT_EQ(make_evaluator().score_code(code, problem).verdicts[0], Verdict::wrong_output);
  EXPECT_EQ(make_evaluator({.numeric_tolerance = 1e-5}).score_code(code, problem).verdicts[0],
            Verdict::pass);
}

TEST(Evaluator, MemoizationSkipsRunner) {
  auto ev = make_evaluator({.memoize = true});
  auto problem = with_tests({{"x", "x"}, {"y", "y"}});
  ev.score_code("def solve(s):\n    print(s)\n", problem);
  const auto first = ev.runner_invocations();
  ev.score_code("def solve(s):\n    print(s)\n", problem);
  EXPECT_EQ(ev.runner_invocations(), first);
  EXPECT_EQ(first, 2u);
}

TEST(Evaluator, AddingPassingTestNeverLowersPassCount) {
  auto ev = make_evaluator();
  const std::string code = "def solve(s):\n    print(s.upper())\n";
  auto problem = with_tests({{"a", "A"}, {"b", "x"}});
  auto before = ev.score_code(code, problem);
  problem.tests.push_back({"c", "C"});
  auto after = ev.score_code(code, problem);
  auto passes = [](const EvalOutcome& o) { return std::count(o.verdicts.begin(), o.verdicts.end(), Verdict::pass); };
  EXPECT_GE(passes(after), passes(before));
  EXPECT_DOUBLE_EQ(after.score, 2.0 / 3.0);
}

TEST(Evaluator, StdoutFidelityAgainstDirectExecution) {
  // The runner adds nothing to stdout for any exit status.
  auto r = run_process({aupair::testing::python(), "-c",
                        "import sys\nsys.stdout.write('7 3\\n')"}, 5s, 1024);
  auto ev = make_evaluator();
  auto out = ev.score_code("def solve(s):\n    print(s)\n", with_tests({{"7 3", r.stdout_data}}));
  EXPECT_EQ(out.verdicts[0], Verdict::pass);
}
