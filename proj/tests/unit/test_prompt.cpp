#include <gtest/gtest.h>

#include <regex>

#include "aupair/error.hpp"
#include "aupair/prompt.hpp"
#include "aupair/random.hpp"
#include "support.hpp"

using namespace aupair;
using aupair::testing::fake_attempt;
using aupair::testing::make_problem;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

struct Fixture {
  std::vector<Problem> problems{make_problem("a"), make_problem("b"), make_problem("t")};
  ProblemIndex index{problems};
  CandidatePair p1{"pair/1", "a", fake_attempt("g1", 1, 4), fake_attempt("f1", 3, 4), 1};
  CandidatePair p2{"pair/2", "b", fake_attempt("g2", 0, 4), fake_attempt("f2", 4, 4), 2};
  Attempt target_guess = fake_attempt("gt", 2, 4);
};

}  // namespace

TEST(GuessPrompt, DescriptionThenInstruction) {
  Problem p = make_problem("x");
  p.description = "Add two numbers.";
  const auto prompt = build_guess_prompt(p);
  const std::string instruction =
      "Complete the function definition below. Print the final answer in the function. "
      "Do not write main. Do not write anything outside the solve() function.";
  ASSERT_EQ(prompt.rfind("Add two numbers.", 0), 0u);
  EXPECT_GT(prompt.find(instruction), prompt.find("Add two numbers."));
  EXPECT_NE(prompt.find("def solve(s: str):"), std::string::npos);
  EXPECT_EQ(build_guess_prompt(p), prompt);
}

TEST(GuessPrompt, DelimiterInsideDescription) {
  Problem p = make_problem("x");
  p.description = std::string("tricky ") + std::string(kExampleSeparator) + " ```python";
  const auto prompt = build_guess_prompt(p);
  EXPECT_EQ(count_of(prompt, p.description), 1u);
  EXPECT_EQ(extract_code(prompt), "def solve(s: str):\n  ...");
}

TEST(RepairPrompt, ScoresRenderedAsPercent) {
  Fixture f;
  auto guess = fake_attempt("g", 1, 4);  // 0.25
  CandidatePair pair("pair/9", "a", guess, fake_attempt("f", 3, 4), 0);
  Attempt target = fake_attempt("gt", 2, 4);  // 0.5
  auto spec = make_repair_spec({&pair}, f.index, f.problems[2], target);
  const auto prompt = build_repair_prompt(spec);
  EXPECT_NE(prompt.find("score(A(bad)) = 25"), std::string::npos);
  EXPECT_NE(prompt.find("score(A(good)) = 75"), std::string::npos);
  EXPECT_NE(prompt.find("score(A(bad)) = 50"), std::string::npos);
  const std::string tail = "score(A(good)) = 100\n";
  EXPECT_EQ(prompt.substr(prompt.size() - tail.size()), tail);
}

TEST(RepairPrompt, NaiveStyleHasNoHeaderOrScores) {
  Fixture f;
  auto spec = make_repair_spec({&f.p1}, f.index, f.problems[2], f.target_guess, PromptStyle::naive);
  const auto prompt = build_repair_prompt(spec);
  EXPECT_EQ(prompt.find("experienced software developer"), std::string::npos);
  EXPECT_EQ(prompt.find("main objective"), std::string::npos);
  EXPECT_EQ(prompt.find("score("), std::string::npos);
  EXPECT_NE(prompt.find(f.p1.fix().code), std::string::npos);
}

TEST(RepairPrompt, InstructionStyleHasHeaderButNoScores) {
  Fixture f;
  auto spec =
      make_repair_spec({&f.p1}, f.index, f.problems[2], f.target_guess, PromptStyle::instruction);
  const auto prompt = build_repair_prompt(spec);
  EXPECT_EQ(prompt.rfind("You are an experienced software developer.", 0), 0u);
  EXPECT_EQ(prompt.find("score("), std::string::npos);
}

TEST(RepairPrompt, PairsInGivenOrderOnce) {
  Fixture f;
  auto spec = make_repair_spec({&f.p2, &f.p1}, f.index, f.problems[2], f.target_guess);
  const auto prompt = build_repair_prompt(spec);
  EXPECT_EQ(count_of(prompt, f.p1.fix().code), 1u);
  EXPECT_EQ(count_of(prompt, f.p2.fix().code), 1u);
  EXPECT_LT(prompt.find(f.p2.fix().code), prompt.find(f.p1.fix().code));
  EXPECT_EQ(count_of(prompt, std::string(kExampleSeparator)), 2u);
  EXPECT_LT(prompt.find("Example 1:"), prompt.find("Example 2:"));
}

TEST(RepairPrompt, EmptyPairsOnlyThroughAllowEmpty) {
  Fixture f;
  auto spec = make_repair_spec({}, f.index, f.problems[2], f.target_guess);
  EXPECT_THROW(build_repair_prompt(spec), ValidationError);
  const auto prompt = build_repair_prompt_allow_empty(spec);
  EXPECT_EQ(prompt.find("Example"), std::string::npos);
  EXPECT_NE(prompt.find(f.target_guess.code), std::string::npos);
}

TEST(RepairPrompt, PureFunction) {
  Fixture f;
  auto spec = make_repair_spec({&f.p1, &f.p2}, f.index, f.problems[2], f.target_guess);
  EXPECT_EQ(build_repair_prompt(spec), build_repair_prompt(spec));
}

TEST(RepairPrompt, EveryScoreMatchesRoundedFraction) {
  Rng rng(17);
  std::vector<Problem> problems{make_problem("a", 7), make_problem("t", 7)};
  ProblemIndex index(problems);
  const std::regex score_re(R"(score\(A\((bad|good)\)\) = (\d+))");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t g = rng.index(7);
    const std::size_t fx = g + 1 + rng.index(7 - g);
    CandidatePair pair("p", "a", fake_attempt("g", g, 7), fake_attempt("f", fx, 7), 0);
    auto target = fake_attempt("t", rng.index(8), 7);
    const auto prompt = build_repair_prompt(make_repair_spec({&pair}, index, problems[1], target));
    std::vector<int> seen;
    for (std::sregex_iterator it(prompt.begin(), prompt.end(), score_re), end; it != end; ++it)
      seen.push_back(std::stoi((*it)[2]));
    ASSERT_EQ(seen.size(), 4u);
    EXPECT_EQ(seen[0], render_score(pair.guess().score));
    EXPECT_EQ(seen[1], render_score(pair.fix().score));
    EXPECT_EQ(seen[2], render_score(target.score));
    EXPECT_EQ(seen[3], 100);
    EXPECT_EQ(seen[0], static_cast<int>(std::floor(100.0 * g / 7 + 0.5)));
  }
}

TEST(RenderScore, HalfUp) {
  EXPECT_EQ(render_score(0.0), 0);
  EXPECT_EQ(render_score(1.0), 100);
  EXPECT_EQ(render_score(0.125), 13);
  EXPECT_EQ(render_score(0.285), 29);
  EXPECT_EQ(render_score(1.0 / 3.0), 33);
  EXPECT_EQ(render_score(2.0 / 3.0), 67);
}

TEST(ExtractCode, SingleFence) {
  EXPECT_EQ(extract_code("Here:\n```python\ndef solve(s):\n    print(s)\n```\nDone."),
            "def solve(s):\n    print(s)");
}

TEST(ExtractCode, LastFenceWins) {
  EXPECT_EQ(extract_code("prose\n```python\nold()\n```\nthen\n```\nnew()\n```\n"), "new()");
}

TEST(ExtractCode, BareDefinitionFallback) {
  EXPECT_EQ(extract_code("Sure.\ndef solve(s):\n    return 1\n"), "def solve(s):\n    return 1\n");
}

TEST(ExtractCode, ProseOnly) {
  try {
    extract_code("I cannot help with that.");
    FAIL();
  } catch (const NoCodeFound& e) {
    EXPECT_STREQ(e.what(), "no code found");
  }
}

TEST(ExtractCode, RoundTripThroughFence) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::string code;
    const std::size_t lines = 1 + rng.index(6);
    for (std::size_t l = 0; l < lines; ++l) {
      code += std::string(rng.index(8), ' ');
      for (std::size_t c = 0, n = 1 + rng.index(20); c < n; ++c)
        code += "abcxyz()=+:'\" #"[rng.index(15)];
      if (l + 1 < lines) code += '\n';
    }
    EXPECT_EQ(extract_code(fence_code(code)), code);
  }
}

TEST(FeedbackPrompts, DistinctAndCarryFeedback) {
  Problem p = make_problem("x");
  auto guess = fake_attempt("g", 1, 4);
  const auto fb = build_feedback_prompt(p, guess);
  const auto rp = build_feedback_repair_prompt(p, guess, "off by one");
  EXPECT_NE(fb, rp);
  EXPECT_NE(rp.find("off by one"), std::string::npos);
  EXPECT_NE(fb.find(guess.code), std::string::npos);
}
