#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aupair/inference.hpp"
#include "aupair/pairgen.hpp"
#include "aupair/types.hpp"

namespace aupair {

// Syntax tree as produced by the parse helper: node kind, a label holding the
// node's scalar fields (identifiers, literal values, list arities) and children.
struct AstNode {
  std::string kind;
  std::string label;
  std::vector<AstNode> children;
};

class AstParser {
 public:
  virtual ~AstParser() = default;
  // nullopt for sources that do not parse.
  virtual std::vector<std::optional<AstNode>> parse(const std::vector<std::string>& sources) = 0;
};

// Parses guest sources with the Python interpreter's own `ast` module, in one
// interpreter process per batch.
class PythonAstParser final : public AstParser {
 public:
  explicit PythonAstParser(std::string python = "python3", bool normalize_identifiers = false);
  std::vector<std::optional<AstNode>> parse(const std::vector<std::string>& sources) override;

 private:
  std::string python_;
  bool normalize_identifiers_;
};

struct SubtreeSet {
  std::set<std::string> digests;
  bool parsed = true;

  std::size_t size() const { return digests.size(); }
  bool operator==(const SubtreeSet&) const = default;
};

// Digest of every subtree: each node hashes its kind, label and child digests.
SubtreeSet subtree_set(const AstNode& root);
SubtreeSet subtree_set(const std::optional<AstNode>& root);

// Elements of `a` not in `b`.
std::set<std::string> set_difference(const SubtreeSet& a, const SubtreeSet& b);

struct DiversityReport {
  double delta = 0.0;
  std::vector<std::size_t> per_problem_diff_counts;
  std::size_t s_max = 0;
  std::size_t n = 0;
  std::size_t unparsed = 0;  // guesses and fixes that failed to parse
  bool all_unparsed = false;
};

// delta = sum_i |S_i| / (N * |problems| * S_max), where S_i is the union over a
// problem's fixes of (fix subtrees \ guess subtrees) and S_max the largest |S_i|.
DiversityReport diversity_from_sets(const std::vector<SubtreeSet>& guesses,
                                    const std::vector<std::vector<SubtreeSet>>& fixes,
                                    std::size_t n);

// Uses the first N attempts of every test problem; attempts without code are skipped.
DiversityReport diversity_score(const StrategyResult& result, const std::vector<CuratedProblem>& test,
                                std::size_t n, AstParser& parser);

json diversity_to_json(const DiversityReport& r);

// Number of repair steps between each stored fix and its initial guess,
// histogrammed. Throws ValidationError on cycles or dangling parents.
std::map<std::size_t, std::size_t> lineage_histogram(const PairStore& store);

enum class BreakdownAxis { difficulty, category };

struct BreakdownRow {
  std::string bucket;
  std::size_t n_problems = 0;
  double test_pass_rate = 0.0;
  double strict_accuracy = 0.0;
  double initial_test_pass_rate = 0.0;
  double initial_strict_accuracy = 0.0;
  double test_pass_rate_gain = 0.0;  // absolute improvement over the initial guesses
  double strict_accuracy_gain = 0.0;
};

// Per-bucket metrics next to the initial-guess metrics of the same problems.
// Problems carrying several categories count once per category.
std::vector<BreakdownRow> breakdown(const StrategyResult& result,
                                    const std::vector<CuratedProblem>& test, BreakdownAxis axis);

std::string breakdown_csv(const std::vector<BreakdownRow>& rows);

// Number of selected pairs per source-problem category.
std::map<std::string, std::size_t> pair_category_distribution(
    const std::vector<const CandidatePair*>& pairs, const ProblemIndex& problems);

}  // namespace aupair
