#include <gtest/gtest.h>

#include "aupair/backends.hpp"
#include "aupair/error.hpp"
#include "aupair/inference.hpp"
#include "aupair/random.hpp"
#include "support.hpp"

using namespace aupair;
using aupair::testing::FakeScorer;
using aupair::testing::TempDir;
using aupair::testing::fake_attempt;
using aupair::testing::fake_code;
using aupair::testing::fenced;
using aupair::testing::make_problem;

namespace {

Gateway scripted(json doc, std::size_t par = 1) {
  return Gateway(scripted_oracle(parse_ruleset(doc)), nullptr, par);
}

StrategyAttempt sa(std::size_t passed, std::size_t total) {
  return {fake_attempt("a", passed, total), 0, ""};
}

struct Clusters {
  std::vector<CuratedProblem> train, test;
  PairStore store;
  Clusters() {
    for (const std::string c : {"c1", "c2"}) {
      train.push_back({make_problem(c + "-train", 4, std::nullopt, {c}), fake_attempt("g", 0, 4)});
      for (int i = 0; i < 2; ++i)
        test.push_back({make_problem(c + "-test" + std::to_string(i), 4, std::nullopt, {c}),
                        fake_attempt("guess/" + c + std::to_string(i), 1, 4)});
    }
    store.add({"pair/c1", "c1-train", fake_attempt("g1", 0, 4), fake_attempt("f1", 4, 4), 0});
    store.add({"pair/c2", "c2-train", fake_attempt("g2", 0, 4), fake_attempt("f2", 4, 4), 1});
  }
  json oracle() const {
    return {{"default", "```python\n{{guess}}```"},
            {"rules",
             {{{"pair", "pair/c1"}, {"problem", {"c1-test0", "c1-test1"}}, {"response", fenced(fake_code("all"))}},
              {{"pair", "pair/c2"}, {"problem", {"c2-test0", "c2-test1"}}, {"response", fenced(fake_code("all"))}}}}};
  }
};

}  // namespace

TEST(AuPairInference, TwoClustersSolvedAtN2) {
  Clusters c;
  auto gw = scripted(c.oracle(), 2);
  Budget budget(8);
  FakeScorer scorer;
  ProblemIndex index(c.train);
  auto r = run_pair_inference(c.test, {&c.store.at(0), &c.store.at(1)}, index, 2, gw, budget, scorer,
                              {.gen = {}, .parallelism = 2});
  EXPECT_EQ(budget.used(), 8);
  auto m = compute_metrics(r, c.test);
  EXPECT_DOUBLE_EQ(m.test_pass_rate, 1.0);
  EXPECT_DOUBLE_EQ(m.strict_accuracy, 1.0);
  for (const auto& [pid, attempts] : r.per_problem) {
    ASSERT_EQ(attempts.size(), 2u);
    EXPECT_EQ(attempts[0].pair_id, "pair/c1");
    EXPECT_EQ(attempts[1].pair_id, "pair/c2");
  }
  // At N=1 only the first cluster is covered.
  auto m1 = compute_metrics(r, c.test, false, 1);
  EXPECT_DOUBLE_EQ(m1.strict_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m1.test_pass_rate, (1.0 + 1.0 + 0.25 + 0.25) / 4);
}

TEST(AuPairInference, ZeroBudgetLeavesInitialGuessMetrics) {
  Clusters c;
  auto gw = scripted(c.oracle());
  Budget budget(0);
  FakeScorer scorer;
  ProblemIndex index(c.train);
  auto r = run_pair_inference(c.test, {&c.store.at(0)}, index, 0, gw, budget, scorer);
  for (const auto& [_, attempts] : r.per_problem) EXPECT_TRUE(attempts.empty());
  auto with_guess = compute_metrics(r, c.test, true);
  EXPECT_DOUBLE_EQ(with_guess.test_pass_rate, 0.25);
  EXPECT_DOUBLE_EQ(with_guess.strict_accuracy, 0.0);
  EXPECT_DOUBLE_EQ(compute_metrics(r, c.test).test_pass_rate, 0.0);
}

TEST(AuPairInference, UnhelpfulPairKeepsGuessScore) {
  Clusters c;
  auto gw = scripted({{"default", "```python\n{{guess}}```"}});
  Budget budget(4);
  FakeScorer scorer;
  ProblemIndex index(c.train);
  auto r = run_pair_inference(c.test, {&c.store.at(0)}, index, 1, gw, budget, scorer);
  for (const auto& [_, attempts] : r.per_problem) EXPECT_DOUBLE_EQ(attempts[0].attempt.score, 0.25);
}

TEST(AuPairInference, NTruncatesToListLength) {
  Clusters c;
  auto gw = scripted(c.oracle());
  Budget budget(100);
  FakeScorer scorer;
  ProblemIndex index(c.train);
  auto r = run_pair_inference(c.test, {&c.store.at(0), &c.store.at(1)}, index, 32, gw, budget, scorer);
  EXPECT_EQ(budget.used(), 8);
  EXPECT_EQ(planned_calls_per_problem(Strategy::aupair, 32, 2), 2);
}

TEST(BestOfN, IdenticalResponses) {
  Clusters c;
  auto gw = scripted({{"default", fenced(fake_code("2"))}});
  Budget budget(12);
  FakeScorer scorer;
  auto r = run_best_of_n(c.test, 3, gw, budget, scorer);
  for (const auto& [_, attempts] : r.per_problem) {
    ASSERT_EQ(attempts.size(), 3u);
    EXPECT_EQ(attempts[0].attempt.code, attempts[2].attempt.code);
  }
  for (const auto& rec : gw.log().records()) {
    EXPECT_EQ(rec.request.tag, "best_of_n");
    EXPECT_DOUBLE_EQ(rec.request.temperature, 1.0);
    EXPECT_EQ(rec.request.prompt.find("Example 1:"), std::string::npos);
  }
}

TEST(BestOfN, PerfectAtAttemptThree) {
  std::vector<CuratedProblem> test{{make_problem("p"), fake_attempt("g", 0, 4)}};
  auto gw = scripted({{"default", fenced(fake_code("1"))},
                      {"rules", {{{"attempt_index", 3}, {"response", fenced(fake_code("all"))}}}}});
  Budget budget(4);
  FakeScorer scorer;
  auto r = run_best_of_n(test, 4, gw, budget, scorer);
  EXPECT_DOUBLE_EQ(compute_metrics(r, test).test_pass_rate, 1.0);
  EXPECT_DOUBLE_EQ(compute_metrics(r, test, false, 3).test_pass_rate, 0.25);
  Budget one(1);
  auto gw1 = scripted({{"default", fenced(fake_code("1"))}});
  EXPECT_EQ(run_best_of_n(test, 1, gw1, one, scorer).per_problem.at("p").size(), 1u);
  EXPECT_THROW(run_best_of_n(test, 0, gw1, one, scorer), ValidationError);
}

TEST(SelfRepair, DefaultSplitUsesThirtyTwoCalls) {
  std::vector<CuratedProblem> test{{make_problem("p"), fake_attempt("g", 0, 4)},
                                   {make_problem("q"), fake_attempt("g", 1, 4)}};
  auto gw = scripted({{"default", "x"},
                      {"rules",
                       {{{"purpose", "feedback"}, {"response", "the loop is wrong"}},
                        {{"purpose", "repair"}, {"response", fenced(fake_code("3"))}}}}});
  Budget budget(64);
  FakeScorer scorer;
  auto r = run_self_repair(test, 32, {}, gw, budget, scorer);
  EXPECT_EQ(budget.used(), 64);
  std::map<std::string, std::map<std::string, int>> tags;
  for (const auto& rec : gw.log().records()) ++tags[rec.request.context.problem_id][rec.request.tag];
  for (const auto& id : {"p", "q"}) {
    EXPECT_EQ(tags[id]["feedback"], 4);
    EXPECT_EQ(tags[id]["repair"], 28);
    EXPECT_EQ(r.per_problem.at(id).size(), 28u);
  }
  for (const auto& rec : gw.log().records())
    if (rec.request.tag == "repair") EXPECT_NE(rec.request.prompt.find("the loop is wrong"), std::string::npos);
  EXPECT_DOUBLE_EQ(compute_metrics(r, test).test_pass_rate, 0.75);
}

TEST(SelfRepair, SmallPlans) {
  std::vector<CuratedProblem> test{{make_problem("p"), fake_attempt("g", 0, 4)}};
  FakeScorer scorer;
  {
    auto gw = scripted({{"default", fenced(fake_code("1"))}});
    Budget budget(2);
    auto r = run_self_repair(test, 2, {1, 1}, gw, budget, scorer);
    EXPECT_EQ(budget.used(), 2);
    EXPECT_EQ(r.per_problem.at("p").size(), 1u);
  }
  {
    auto gw = scripted({{"default", fenced(fake_code("1"))}});
    Budget budget(10);
    run_self_repair(test, 10, {3, 2}, gw, budget, scorer);
    EXPECT_EQ(budget.used(), 9);
  }
  auto gw = scripted({{"default", "x"}});
  Budget budget(10);
  EXPECT_THROW(run_self_repair(test, 10, {4, 7}, gw, budget, scorer), ValidationError);
  EXPECT_EQ(budget.used(), 0);
}

TEST(Metrics, TwoProblemFixture) {
  std::vector<CuratedProblem> test{{make_problem("P1", 4), fake_attempt("g", 0, 4)},
                                   {make_problem("P2", 2), fake_attempt("g", 0, 2)}};
  StrategyResult r;
  r.per_problem["P1"] = {sa(2, 4), sa(3, 4)};
  r.per_problem["P2"] = {sa(2, 2), sa(0, 2)};
  auto m = compute_metrics(r, test);
  EXPECT_DOUBLE_EQ(m.test_pass_rate, 0.875);
  EXPECT_DOUBLE_EQ(m.strict_accuracy, 0.5);
  EXPECT_EQ(m.n_problems, 2u);
}

TEST(Metrics, Bounds) {
  std::vector<CuratedProblem> test{{make_problem("a", 3), fake_attempt("g", 0, 3)},
                                   {make_problem("b", 3), fake_attempt("g", 0, 3)}};
  StrategyResult good, bad;
  good.per_problem["a"] = {sa(3, 3)};
  good.per_problem["b"] = {sa(3, 3), sa(3, 3)};
  bad.per_problem["a"] = {sa(0, 3)};
  auto g = compute_metrics(good, test), b = compute_metrics(bad, test);
  EXPECT_DOUBLE_EQ(g.test_pass_rate, 1.0);
  EXPECT_DOUBLE_EQ(g.strict_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(b.test_pass_rate, 0.0);
  EXPECT_DOUBLE_EQ(b.strict_accuracy, 0.0);
}

TEST(Metrics, UnknownProblemRejected) {
  std::vector<CuratedProblem> test{{make_problem("a"), fake_attempt("g", 0, 4)}};
  StrategyResult r;
  r.per_problem["zzz"] = {sa(1, 4)};
  EXPECT_THROW(compute_metrics(r, test), ValidationError);
}

TEST(Metrics, RandomResultsStrictBelowPassAndMonotoneInN) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<CuratedProblem> test;
    StrategyResult r;
    const std::vector<std::string> levels{"easy", "hard"};
    for (std::size_t p = 0, n = 1 + rng.index(6); p < n; ++p) {
      const std::size_t tests = 1 + rng.index(5);
      const auto id = "p" + std::to_string(p);
      test.push_back({make_problem(id, tests, levels[rng.index(2)]), fake_attempt("g", rng.index(tests), tests)});
      for (std::size_t a = 0, k = rng.index(6); a < k; ++a) r.per_problem[id].push_back(sa(rng.index(tests + 1), tests));
    }
    const bool with_guess = rng.index(2) == 1;
    double prev_pass = -1, prev_strict = -1;
    for (std::size_t n = 0; n <= 6; ++n) {
      auto m = compute_metrics(r, test, with_guess, n);
      EXPECT_LE(m.strict_accuracy, m.test_pass_rate + 1e-15);
      EXPECT_GE(m.test_pass_rate, prev_pass);
      EXPECT_GE(m.strict_accuracy, prev_strict);
      prev_pass = m.test_pass_rate;
      prev_strict = m.strict_accuracy;
      double weighted = 0;
      std::size_t total = 0;
      for (const auto& [_, b] : m.per_difficulty) {
        weighted += b.test_pass_rate * b.n_problems;
        total += b.n_problems;
        EXPECT_LE(b.strict_accuracy, b.test_pass_rate + 1e-15);
      }
      EXPECT_EQ(total, test.size());
      EXPECT_NEAR(weighted / total, m.test_pass_rate, 1e-12);
    }
  }
}

TEST(StrategyResult, JsonlRoundTrip) {
  TempDir dir;
  StrategyResult r;
  r.strategy = Strategy::random_pairs;
  r.budget_per_problem = 3;
  r.per_problem["a"] = {{fake_attempt("x", 1, 2), 4, "pair/1"}, {fake_attempt("y", 2, 2), 7, "pair/2"}};
  r.per_problem["b"] = {{fake_attempt("z", 0, 2), 5, "pair/1"}};
  std::ofstream(dir / "r.jsonl") << strategy_result_to_jsonl(r);
  EXPECT_EQ(load_strategy_result(dir / "r.jsonl", Strategy::random_pairs, 3), r);
}

TEST(Strategy, Names) {
  for (auto s : {Strategy::aupair, Strategy::best_of_n, Strategy::self_repair, Strategy::random_pairs})
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  EXPECT_THROW(strategy_from_string("nope"), ValidationError);
}
