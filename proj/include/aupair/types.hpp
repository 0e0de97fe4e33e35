#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aupair {

struct TestCase {
  std::string input;            // handed verbatim to solve(s)
  std::string expected_output;  // reference stdout, stored byte-exact

  bool operator==(const TestCase&) const = default;
};

struct Problem {
  std::string id;
  std::string description;
  std::vector<TestCase> tests;
  std::optional<std::string> difficulty;
  std::vector<std::string> categories;
  std::string source;

  bool operator==(const Problem&) const = default;
};

enum class Verdict { pass, wrong_output, runtime_error, timeout, protocol_error };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

// A candidate program together with its unit-test score in [0, 1].
struct Attempt {
  std::string id;
  std::string code;
  double score = 0.0;
  std::vector<Verdict> per_test;  // empty when not measured per test
  std::optional<std::string> parent_attempt;

  // Builds an attempt whose score is the pass fraction of `verdicts`.
  static Attempt from_verdicts(std::string id, std::string code, std::vector<Verdict> verdicts,
                               std::optional<std::string> parent = std::nullopt);

  bool solved() const { return score >= 1.0; }

  // Throws ValidationError when score is outside [0,1] or disagrees with per_test.
  void validate() const;

  bool operator==(const Attempt&) const = default;
};

double pass_fraction(const std::vector<Verdict>& verdicts);

// An improving (guess, fix) pair. Construction rejects fix.score <= guess.score.
class CandidatePair {
 public:
  CandidatePair(std::string id, std::string problem_id, Attempt guess, Attempt fix,
                std::int64_t created_at_call);

  const std::string& id() const { return id_; }
  const std::string& problem_id() const { return problem_id_; }
  const Attempt& guess() const { return guess_; }
  const Attempt& fix() const { return fix_; }
  std::int64_t created_at_call() const { return created_at_call_; }

  bool operator==(const CandidatePair&) const = default;

 private:
  std::string id_;
  std::string problem_id_;
  Attempt guess_;
  Attempt fix_;
  std::int64_t created_at_call_;
};

// A problem after curation: it carries the initial guess the repair phases start from.
struct CuratedProblem {
  Problem problem;
  Attempt guess;

  bool operator==(const CuratedProblem&) const = default;
};

// Lookup by id over problems owned elsewhere.
class ProblemIndex {
 public:
  ProblemIndex() = default;
  explicit ProblemIndex(const std::vector<Problem>& problems);
  explicit ProblemIndex(const std::vector<CuratedProblem>& problems);

  void add(const Problem& p);
  const Problem& at(const std::string& id) const;
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }
  std::size_t size() const { return by_id_.size(); }

 private:
  std::map<std::string, const Problem*> by_id_;
};

}  // namespace aupair
