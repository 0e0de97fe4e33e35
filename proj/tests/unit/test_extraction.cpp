#include <gtest/gtest.h>

#include <set>

#include "aupair/backends.hpp"
#include "aupair/error.hpp"
#include "aupair/extraction.hpp"
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

std::vector<std::size_t> order_of(const AuPairList& l) {
  std::vector<std::size_t> out;
  for (const auto& e : l.entries) out.push_back(e.row);
  return out;
}

FixQualityMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<std::vector<double>> rows(r, std::vector<double>(c));
  for (auto& row : rows)
    for (auto& v : row) v = rng.index(3) == 0 ? 0.0 : rng.unit();
  return FixQualityMatrix::from_rows(rows);
}

}  // namespace

TEST(Extract, HandTraceThreeRows) {
  auto m = FixQualityMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {0.6, 0.6}});
  auto list = extract_aupairs(m, 0.05);
  EXPECT_EQ(order_of(list), (std::vector<std::size_t>{2, 0, 1}));
  ASSERT_EQ(list.size(), 3u);
  EXPECT_NEAR(list.entries[0].marginal_gain, 0.6, 1e-12);
  EXPECT_NEAR(list.entries[1].marginal_gain, 0.2, 1e-12);
  EXPECT_NEAR(list.entries[2].marginal_gain, 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(list.tolerance, 0.05);
}

TEST(Extract, BinaryHandTrace) {
  auto m = FixQualityMatrix::from_rows({{1, 1, 0}, {0, 1, 1}, {1, 0, 0}});
  auto list = extract_aupairs(m, 0.1);
  EXPECT_EQ(order_of(list), (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(list.entries[0].marginal_gain, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(list.entries[1].marginal_gain, 1.0 / 3.0, 1e-12);
}

TEST(Extract, ZerosAndEmpty) {
  EXPECT_EQ(extract_aupairs(FixQualityMatrix::from_rows({{0, 0}, {0, 0}}), 1e-3).size(), 0u);
  EXPECT_EQ(extract_aupairs(FixQualityMatrix(), 1e-3).size(), 0u);
  EXPECT_EQ(extract_aupairs(FixQualityMatrix({"a", "b"}, {}), 1e-3).size(), 0u);
}

TEST(Extract, TieBreaksToLowestRow) {
  auto list = extract_aupairs(FixQualityMatrix::from_rows({{0, 1}, {1, 0}, {0, 1}}), 1e-3);
  EXPECT_EQ(order_of(list), (std::vector<std::size_t>{0, 1}));
}

TEST(Extract, StopsBelowTolerance) {
  auto m = FixQualityMatrix::from_rows({{1, 0, 0, 0}, {1, 0.1, 0, 0}});
  EXPECT_EQ(order_of(extract_aupairs(m, 0.05)), (std::vector<std::size_t>{1}));
  EXPECT_EQ(order_of(extract_aupairs(m, 0.025)), (std::vector<std::size_t>{1}));
  EXPECT_EQ(order_of(extract_aupairs(m, 0.001)), (std::vector<std::size_t>{1}));
  auto m2 = FixQualityMatrix::from_rows({{0.04, 0.04}});
  EXPECT_EQ(extract_aupairs(m2, 0.05).size(), 0u);
  EXPECT_EQ(extract_aupairs(m2, 0.04).size(), 1u);
}

TEST(Extract, ClipNecessityRegression) {
  auto m = FixQualityMatrix::from_rows({{0, 1, 0}, {0.5, 0, 0.5}, {0.5, 0.5, 1}});
  auto clipped = extract_aupairs(m, 1e-3, ClipMode::clip);
  auto raw = extract_aupairs(m, 1e-3, ClipMode::none);
  EXPECT_EQ(order_of(clipped), (std::vector<std::size_t>{2, 0}));
  EXPECT_NEAR(clipped.entries[1].marginal_gain, 1.0 / 6.0, 1e-12);
  EXPECT_EQ(order_of(raw), (std::vector<std::size_t>{2}));
}

TEST(Extract, PropertiesOnRandomMatrices) {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    auto m = random_matrix(rng, 1 + rng.index(25), 1 + rng.index(25));
    const double eps = 1e-3 + rng.unit() * 0.1;
    auto list = extract_aupairs(m, eps);
    std::set<std::size_t> rows;
    for (std::size_t i = 0; i < list.size(); ++i) {
      EXPECT_TRUE(rows.insert(list.entries[i].row).second);
      EXPECT_GE(list.entries[i].marginal_gain, eps);
      if (i) EXPECT_LE(list.entries[i].marginal_gain, list.entries[i - 1].marginal_gain + 1e-15);
      EXPECT_EQ(list.entries[i].pair_id, m.row_ids()[list.entries[i].row]);
    }
    EXPECT_EQ(extract_aupairs(m, eps), list);
  }
}

TEST(Matrix, SetValidatesRange) {
  FixQualityMatrix m({"a"}, {"x"});
  EXPECT_THROW(m.set(0, 0, 1.5), ValidationError);
  EXPECT_THROW(m.set(0, 0, -0.1), ValidationError);
  m.set(0, 0, 0.25);
  EXPECT_DOUBLE_EQ(m.at(0, 0), 0.25);
}

TEST(Matrix, FileRoundTripIsExact) {
  TempDir dir;
  Rng rng(5);
  auto m = random_matrix(rng, 7, 5);
  m.provenance = {{"k", "v"}};
  save_matrix(dir / "m.fqm", m);
  auto back = load_matrix(dir / "m.fqm");
  EXPECT_EQ(back, m);
  EXPECT_EQ(serialize_matrix(back), serialize_matrix(m));
  auto bytes = serialize_matrix(m);
  EXPECT_EQ(bytes.substr(0, 8), "AUPAIRFQ");
  EXPECT_THROW(deserialize_matrix(bytes.substr(0, bytes.size() - 3)), ValidationError);
  EXPECT_THROW(deserialize_matrix("NOTMAGIC" + bytes.substr(8)), ValidationError);
}

TEST(AuPairList, JsonlRoundTrip) {
  TempDir dir;
  auto m = FixQualityMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {0.6, 0.6}});
  auto list = extract_aupairs(m, 0.05);
  std::ofstream(dir / "a.jsonl") << aupairs_to_jsonl(list);
  EXPECT_EQ(load_aupairs(dir / "a.jsonl"), list);
}

namespace {

struct MatrixSetup {
  std::vector<CuratedProblem> train, val;
  PairStore store;
  std::vector<CuratedProblem> all;

  explicit MatrixSetup(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto t = "t" + std::to_string(i), v = "v" + std::to_string(i);
      train.push_back({make_problem(t), fake_attempt("guess/" + t, 0, 4)});
      val.push_back({make_problem(v), fake_attempt("guess/" + v, 0, 4)});
      store.add({"pair/" + std::to_string(i), t, fake_attempt("g" + t, 0, 4),
                 fake_attempt("f" + t, 4, 4), static_cast<std::int64_t>(i)});
    }
    all = train;
  }
};

}  // namespace

TEST(FixQuality, DiagonalOracleGivesIdentity) {
  MatrixSetup s(4);
  json rules = json::array();
  for (int i = 0; i < 4; ++i)
    rules.push_back({{"purpose", "matrix"},
                     {"pair", "pair/" + std::to_string(i)},
                     {"problem", "v" + std::to_string(i)},
                     {"response", fenced(fake_code("all"))}});
  Gateway gw(scripted_oracle(parse_ruleset({{"default", "```python\n{{guess}}```"}, {"rules", rules}})),
             nullptr, 3);
  Budget budget(16);
  FakeScorer scorer;
  ProblemIndex index(s.all);
  auto m = compute_fix_quality_matrix(s.store, index, s.val, gw, budget, scorer, {.gen = {}, .parallelism = 3});
  EXPECT_EQ(budget.used(), 16);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(m.at(i, j), i == j ? 1.0 : 0.0);
  auto list = extract_aupairs(m, 1e-3);
  EXPECT_EQ(order_of(list), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(m.row_ids()[2], "pair/2");
  EXPECT_EQ(m.col_ids()[3], "v3");
}

TEST(FixQuality, EmptyStoreAndProse) {
  MatrixSetup s(3);
  ProblemIndex index(s.all);
  FakeScorer scorer;
  Gateway gw(scripted_oracle(parse_ruleset({{"default", "just prose"}})));
  Budget none(0);
  auto empty = compute_fix_quality_matrix(PairStore{}, index, s.val, gw, none, scorer);
  EXPECT_EQ(empty.rows(), 0u);
  EXPECT_EQ(empty.cols(), 3u);
  Budget budget(9);
  auto zeros = compute_fix_quality_matrix(s.store, index, s.val, gw, budget, scorer);
  for (double v : zeros.values()) EXPECT_EQ(v, 0.0);
}

TEST(FixQuality, InsufficientBudgetFailsUpFront) {
  MatrixSetup s(3);
  ProblemIndex index(s.all);
  FakeScorer scorer;
  Gateway gw(scripted_oracle(parse_ruleset({{"default", "x"}})));
  Budget budget(8);
  EXPECT_THROW(compute_fix_quality_matrix(s.store, index, s.val, gw, budget, scorer), BudgetExhausted);
  EXPECT_EQ(budget.used(), 0);
}

TEST(RandomBaseline, DistinctProblems) {
  PairStore store;
  for (int i = 0; i < 10; ++i)
    store.add({"pair/" + std::to_string(i), "p" + std::to_string(i), fake_attempt("g", 0, 4),
               fake_attempt("f" + std::to_string(i), 2, 4), i});
  auto pick = random_pair_baseline(store, 3, 1, true);
  ASSERT_EQ(pick.size(), 3u);
  std::set<std::string> problems;
  for (const auto* p : pick) problems.insert(p->problem_id());
  EXPECT_EQ(problems.size(), 3u);
  EXPECT_EQ(random_pair_baseline(store, 3, 1, true), pick);
  EXPECT_NE(random_pair_baseline(store, 10, 1, true), random_pair_baseline(store, 10, 2, true));
}

TEST(RandomBaseline, DedupLimitsPool) {
  PairStore store;
  for (int i = 0; i < 6; ++i)
    store.add({"pair/" + std::to_string(i), "same", fake_attempt("g", 0, 4),
               fake_attempt("f" + std::to_string(i), 2, 4), i});
  EXPECT_THROW(random_pair_baseline(store, 2, 0, true), ValidationError);
  EXPECT_EQ(random_pair_baseline(store, 1, 0, true).size(), 1u);
  EXPECT_EQ(random_pair_baseline(store, 6, 0, false).size(), 6u);
}
