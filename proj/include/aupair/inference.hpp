#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aupair/evaluator.hpp"
#include "aupair/gateway.hpp"
#include "aupair/pairgen.hpp"
#include "aupair/types.hpp"

namespace aupair {

enum class Strategy { aupair, best_of_n, self_repair, random_pairs };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct StrategyAttempt {
  Attempt attempt;
  std::int64_t call_index = -1;
  std::string pair_id;  // in-context pair, for the pair-driven strategies

  bool operator==(const StrategyAttempt&) const = default;
};

struct StrategyResult {
  Strategy strategy = Strategy::aupair;
  int budget_per_problem = 0;
  std::map<std::string, std::vector<StrategyAttempt>> per_problem;  // call order

  bool operator==(const StrategyResult&) const = default;
};

// Lines of (problem id, call index, score, code digest, code).
std::string strategy_result_to_jsonl(const StrategyResult& r);
StrategyResult load_strategy_result(const std::filesystem::path& path, Strategy strategy,
                                    int budget_per_problem);

struct InferenceOptions {
  GenerationSettings gen;
  std::size_t parallelism = 1;  // problems processed concurrently
};

// Feedback generations f and repairs per feedback r; f * (1 + r) calls per problem.
struct SelfRepairPlan {
  int feedbacks = 4;
  int repairs_per_feedback = 7;
};

// Calls per problem each strategy spends for budget N.
std::int64_t planned_calls_per_problem(Strategy s, int n, std::size_t available_pairs,
                                       const SelfRepairPlan& plan = {});

// One 1-shot repair per pair in `ordered_pairs`, using the first
// min(N, |pairs|). `label` distinguishes AuPairs from random pairs.
StrategyResult run_pair_inference(const std::vector<CuratedProblem>& test,
                                  const std::vector<const CandidatePair*>& ordered_pairs,
                                  const ProblemIndex& pair_problems, int n, Gateway& gateway,
                                  Budget& budget, const CodeScorer& scorer,
                                  const InferenceOptions& options = {},
                                  Strategy label = Strategy::aupair);

// N independent 0-shot repairs of the guess.
StrategyResult run_best_of_n(const std::vector<CuratedProblem>& test, int n, Gateway& gateway,
                             Budget& budget, const CodeScorer& scorer,
                             const InferenceOptions& options = {});

// f feedback calls per problem, each followed by r repairs conditioned on it.
// Only the repairs are scored.
StrategyResult run_self_repair(const std::vector<CuratedProblem>& test, int n,
                               const SelfRepairPlan& plan, Gateway& gateway, Budget& budget,
                               const CodeScorer& scorer, const InferenceOptions& options = {});

struct BucketMetrics {
  std::size_t n_problems = 0;
  double test_pass_rate = 0.0;
  double strict_accuracy = 0.0;

  bool operator==(const BucketMetrics&) const = default;
};

struct MetricsReport {
  double test_pass_rate = 0.0;
  double strict_accuracy = 0.0;
  std::size_t n_problems = 0;
  std::map<std::string, BucketMetrics> per_difficulty;
  std::map<std::string, BucketMetrics> per_category;

  bool operator==(const MetricsReport&) const = default;
};

inline constexpr std::string_view kUnlabeled = "unlabeled";

// Per problem, the best score and the all-pass indicator over its attempts,
// averaged over `test`. `first_n` restricts each problem to its first attempts.
MetricsReport compute_metrics(const StrategyResult& result, const std::vector<CuratedProblem>& test,
                              bool include_initial_guess = false,
                              std::optional<std::size_t> first_n = std::nullopt);

json metrics_to_json(const MetricsReport& m);

}  // namespace aupair
