#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aupair/process.hpp"
#include "aupair/types.hpp"

namespace aupair {

struct RunLimits {
  std::chrono::milliseconds wall_timeout{10'000};
  std::size_t max_output_bytes = 1 << 20;
};

// Command prefix for the guest runner; code and input file paths are appended.
struct RunnerConfig {
  std::vector<std::string> command;
};

struct EvalOutcome {
  std::vector<Verdict> verdicts;
  double score = 0.0;
  std::vector<std::string> diagnostics;  // runner stderr per test, capped

  bool operator==(const EvalOutcome& o) const {
    return verdicts == o.verdicts && score == o.score;
  }
};

// Strips trailing whitespace on each line and trailing blank lines, and turns
// CRLF into LF. Leading whitespace is kept.
std::string normalize_output(std::string_view raw);

// Whitespace-token comparison where numeric tokens may differ by `tolerance`
// (absolute, or relative for magnitudes above 1).
bool numeric_equal(std::string_view actual, std::string_view expected, double tolerance);

// Anything that can score guest code against a problem's tests.
class CodeScorer {
 public:
  virtual ~CodeScorer() = default;
  virtual EvalOutcome score_code(std::string_view code, const Problem& problem) const = 0;

  Attempt score_attempt(std::string id, std::string code, const Problem& problem,
                        std::optional<std::string> parent = std::nullopt) const;
};

struct EvaluatorOptions {
  RunLimits limits;
  std::size_t parallelism = 1;               // concurrent runner processes per problem
  std::optional<double> numeric_tolerance;   // off: normalized exact match
  bool memoize = false;                      // reuse outcomes for identical (code, problem)
};

// Scores guest programs by running the external runner once per test.
class Evaluator final : public CodeScorer {
 public:
  // Throws EnvironmentError when the runner executable cannot be found.
  Evaluator(RunnerConfig runner, EvaluatorOptions options = {});

  EvalOutcome score_code(std::string_view code, const Problem& problem) const override;

  const EvaluatorOptions& options() const { return options_; }
  std::size_t runner_invocations() const;

 private:
  EvalOutcome run_all(std::string_view code, const Problem& problem) const;
  Verdict judge(const TestCase& test, const ProcessResult& r) const;

  RunnerConfig runner_;
  EvaluatorOptions options_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, EvalOutcome> memo_;
  mutable std::size_t invocations_ = 0;
};

}  // namespace aupair
