#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aupair/evaluator.hpp"
#include "aupair/gateway.hpp"
#include "aupair/prompt.hpp"
#include "aupair/types.hpp"

namespace aupair {

// Sampling parameters shared by every generation call of a phase.
struct GenerationSettings {
  double temperature = 1.0;
  int max_tokens = 2048;
  std::vector<std::string> stop_sequences;
  PromptStyle style = PromptStyle::instruction_and_score;
};

GenerationRequest make_request(std::string prompt, std::string tag, const GenerationSettings& gen,
                               RequestContext context = {});

// Extracts and scores the code in `response`. A response without code yields
// an attempt with empty code and score 0.
Attempt score_response(const std::string& response, std::string attempt_id, const Problem& problem,
                       const CodeScorer& scorer, std::optional<std::string> parent);

struct CurationReport {
  std::size_t total = 0;
  std::size_t solved_and_dropped = 0;
  std::size_t retained = 0;
  std::size_t generation_failures = 0;  // retained problems whose guess had no code
  double mean_initial_score = 0.0;      // over retained problems
};

struct CurationResult {
  std::vector<CuratedProblem> curated;
  CurationReport report;
};

// One guess per problem; problems whose guess passes every test are dropped.
CurationResult curate_guesses(const std::vector<Problem>& problems, Gateway& gateway,
                              Budget& budget, const CodeScorer& scorer,
                              const GenerationSettings& gen = {});

std::string curation_report_to_json(const CurationReport& r);

// Append-only pool of candidate pairs. Pairs repeating the guess and fix code
// of a stored pair for the same problem are rejected.
class PairStore {
 public:
  // False when the pair duplicates a stored one. Throws on a reused pair id.
  bool add(CandidatePair pair);

  const std::vector<CandidatePair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const CandidatePair& at(std::size_t i) const { return pairs_.at(i); }
  const CandidatePair& by_id(const std::string& id) const;
  std::vector<const CandidatePair*> for_problem(const std::string& problem_id) const;

  void save(const std::filesystem::path& path) const;
  static PairStore load(const std::filesystem::path& path);

 private:
  std::vector<CandidatePair> pairs_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::size_t>> by_problem_;
  std::map<std::string, std::size_t> content_keys_;
};

struct PairGenOptions {
  std::int64_t calls = 10'000;  // N
  std::size_t k = 32;           // in-context pairs per prompt, capped at |C|
  std::uint64_t seed = 0;
  GenerationSettings gen;
};

enum class IterationOutcome { no_improvement, duplicate, added_imperfect, added_perfect };

std::string_view to_string(IterationOutcome o);

struct PairGenEvent {
  std::int64_t iteration = 0;
  std::int64_t call_index = 0;
  std::string problem_id;
  std::string guess_id;
  double guess_score = 0.0;
  double fix_score = 0.0;
  bool extraction_failed = false;
  IterationOutcome outcome = IterationOutcome::no_improvement;
  std::vector<std::string> context_pair_ids;
  std::size_t instances_after = 0;  // instances of this problem after the iteration
  std::size_t dataset_size_after = 0;
};

json event_to_json(const PairGenEvent& e);

struct PairGenResult {
  PairStore store;
  std::vector<PairGenEvent> events;
  std::vector<CuratedProblem> remaining;  // dataset instances left at the end
};

// Runs the pair-generation loop: sample an instance, build a k-shot repair
// prompt from random stored pairs, generate and score a fix, keep improving
// fixes, re-queue imperfect ones as new instances and retire problems once a
// perfect fix appears. Stops after `calls` iterations, when the budget runs out
// or when no instances remain.
PairGenResult generate_pairs(const std::vector<CuratedProblem>& train, Gateway& gateway,
                             Budget& budget, const CodeScorer& scorer,
                             const PairGenOptions& options);

}  // namespace aupair
