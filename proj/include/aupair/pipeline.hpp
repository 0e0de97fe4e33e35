#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aupair/config.hpp"
#include "aupair/gateway.hpp"
#include "aupair/inference.hpp"

namespace aupair {

// Artifact locations under the work directory.
struct Workdir {
  std::filesystem::path root;

  std::filesystem::path curated() const { return root / "curated.jsonl"; }
  std::filesystem::path curation_report() const { return root / "curation_report.json"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path pairs() const { return root / "pairs.jsonl"; }
  std::filesystem::path pairgen_trace() const { return root / "pairgen_trace.jsonl"; }
  std::filesystem::path matrix() const { return root / "matrix.fqm"; }
  std::filesystem::path aupairs() const { return root / "aupairs.jsonl"; }
  std::filesystem::path results(Strategy s) const {
    return root / "results" / (std::string(to_string(s)) + ".jsonl");
  }
  std::filesystem::path metrics(Strategy s) const {
    return root / "metrics" / (std::string(to_string(s)) + ".json");
  }
  std::filesystem::path scaling() const { return root / "metrics" / "scaling.csv"; }
  std::filesystem::path analysis() const { return root / "analysis"; }
  std::filesystem::path run_log(const std::string& command) const {
    return root / "logs" / (command + ".jsonl");
  }
};

std::filesystem::path meta_path(const std::filesystem::path& artifact);

// Each command reads its upstream artifacts, writes its outputs atomically and
// returns a short JSON summary for the CLI.
json cmd_curate(const RunConfig& config);
json cmd_split(const RunConfig& config);
json cmd_pairgen(const RunConfig& config);
json cmd_extract(const RunConfig& config, bool reuse_matrix = true);
json cmd_eval(const RunConfig& config, const std::vector<Strategy>& strategies = {},
              std::optional<int> n = std::nullopt);
json cmd_analyze(const RunConfig& config);

// Planned model calls per phase, without calling anything.
json dry_run_plan(const RunConfig& config);

// Builds the configured backend chain (replay, recording, fallback).
std::shared_ptr<Backend> make_backend(const RunConfig& config);

}  // namespace aupair
