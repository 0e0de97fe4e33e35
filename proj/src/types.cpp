#include "aupair/types.hpp"

#include <cmath>

#include "aupair/error.hpp"

namespace aupair {

ValidationError::ValidationError(const std::vector<std::string>& problems)
    : Error([&] {
        std::string msg = std::to_string(problems.size()) + " validation error(s):";
        for (const auto& p : problems) msg += "\n  - " + p;
        return msg;
      }()) {}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::wrong_output: return "wrong_output";
    case Verdict::runtime_error: return "runtime_error";
    case Verdict::timeout: return "timeout";
    case Verdict::protocol_error: return "protocol_error";
  }
  return "unknown";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "pass") return Verdict::pass;
  if (s == "wrong_output") return Verdict::wrong_output;
  if (s == "runtime_error") return Verdict::runtime_error;
  if (s == "timeout") return Verdict::timeout;
  if (s == "protocol_error") return Verdict::protocol_error;
  throw ValidationError("unknown verdict '" + std::string(s) + "'");
}

double pass_fraction(const std::vector<Verdict>& verdicts) {
  if (verdicts.empty()) return 0.0;
  std::size_t passed = 0;
  for (auto v : verdicts) passed += v == Verdict::pass ? 1 : 0;
  return static_cast<double>(passed) / static_cast<double>(verdicts.size());
}

Attempt Attempt::from_verdicts(std::string id, std::string code, std::vector<Verdict> verdicts,
                               std::optional<std::string> parent) {
  Attempt a;
  a.id = std::move(id);
  a.code = std::move(code);
  a.score = pass_fraction(verdicts);
  a.per_test = std::move(verdicts);
  a.parent_attempt = std::move(parent);
  return a;
}

void Attempt::validate() const {
  if (!(score >= 0.0 && score <= 1.0))
    throw ValidationError("attempt '" + id + "' score " + std::to_string(score) +
                          " outside [0,1]");
  if (!per_test.empty() && pass_fraction(per_test) != score)
    throw ValidationError("attempt '" + id + "' score disagrees with its per-test verdicts");
}

CandidatePair::CandidatePair(std::string id, std::string problem_id, Attempt guess, Attempt fix,
                             std::int64_t created_at_call)
    : id_(std::move(id)),
      problem_id_(std::move(problem_id)),
      guess_(std::move(guess)),
      fix_(std::move(fix)),
      created_at_call_(created_at_call) {
  guess_.validate();
  fix_.validate();
  if (!(fix_.score > guess_.score))
    throw ValidationError("pair '" + id_ + "': fix score " + std::to_string(fix_.score) +
                          " does not exceed guess score " + std::to_string(guess_.score));
}

ProblemIndex::ProblemIndex(const std::vector<Problem>& problems) {
  for (const auto& p : problems) add(p);
}

ProblemIndex::ProblemIndex(const std::vector<CuratedProblem>& problems) {
  for (const auto& p : problems) add(p.problem);
}

void ProblemIndex::add(const Problem& p) { by_id_[p.id] = &p; }

const Problem& ProblemIndex::at(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("unknown problem id '" + id + "'");
  return *it->second;
}

}  // namespace aupair
