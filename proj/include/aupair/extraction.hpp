#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aupair/evaluator.hpp"
#include "aupair/gateway.hpp"
#include "aupair/pairgen.hpp"
#include "aupair/types.hpp"

namespace aupair {

// Dense |C| x |D_val| matrix of fix scores: entry (i, j) is the score of the
// fix generated for validation problem j with pair i as the 1-shot example.
class FixQualityMatrix {
 public:
  FixQualityMatrix() = default;
  FixQualityMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids);

  // Rows given directly, ids r0.. / c0..; entries must lie in [0,1].
  static FixQualityMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return row_ids_.size(); }
  std::size_t cols() const { return col_ids_.size(); }
  double at(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
  void set(std::size_t i, std::size_t j, double v);

  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& col_ids() const { return col_ids_; }
  const std::vector<double>& values() const { return values_; }

  json provenance = json::object();

  bool operator==(const FixQualityMatrix& o) const {
    return row_ids_ == o.row_ids_ && col_ids_ == o.col_ids_ && values_ == o.values_ &&
           provenance == o.provenance;
  }

 private:
  std::vector<std::string> row_ids_, col_ids_;
  std::vector<double> values_;
};

// Binary layout: 8-byte magic "AUPAIRFQ", u64 little-endian header length, a
// JSON header {rows, cols, row_ids, col_ids, provenance, dtype, layout}, then
// rows*cols IEEE-754 doubles, little-endian, row-major.
std::string serialize_matrix(const FixQualityMatrix& m);
FixQualityMatrix deserialize_matrix(const std::string& bytes);
void save_matrix(const std::filesystem::path& path, const FixQualityMatrix& m);
FixQualityMatrix load_matrix(const std::filesystem::path& path);

struct MatrixOptions {
  GenerationSettings gen;
  std::size_t parallelism = 1;
};

// One 1-shot repair call per (pair, validation problem). Requires the budget to
// cover every cell before the first call.
FixQualityMatrix compute_fix_quality_matrix(const PairStore& pairs, const ProblemIndex& pair_problems,
                                            const std::vector<CuratedProblem>& val,
                                            Gateway& gateway, Budget& budget,
                                            const CodeScorer& scorer,
                                            const MatrixOptions& options = {});

struct AuPairEntry {
  std::size_t row = 0;
  std::string pair_id;
  double marginal_gain = 0.0;

  bool operator==(const AuPairEntry&) const = default;
};

struct AuPairList {
  std::vector<AuPairEntry> entries;
  double tolerance = 1e-3;

  std::size_t size() const { return entries.size(); }
  bool operator==(const AuPairList&) const = default;
};

// `none` disables clipping of negative residuals (regression hook only).
enum class ClipMode { clip, none };

// Greedy selection: take the row with the largest mean (lowest index on ties),
// subtract it from every row, clip to [0,1], and repeat while the best mean is
// at least `tolerance`.
AuPairList extract_aupairs(const FixQualityMatrix& m, double tolerance,
                           ClipMode clip = ClipMode::clip);

std::string aupairs_to_jsonl(const AuPairList& list);
AuPairList load_aupairs(const std::filesystem::path& path);

// Pairs of the list in rank order.
std::vector<const CandidatePair*> resolve_aupairs(const AuPairList& list, const PairStore& store);

// `n` pairs drawn uniformly without replacement. With `dedup`, a draw whose
// source problem is already represented is skipped. Throws ValidationError
// when fewer than `n` eligible pairs exist.
std::vector<const CandidatePair*> random_pair_baseline(const PairStore& store, std::size_t n,
                                                       std::uint64_t seed, bool dedup);

}  // namespace aupair
