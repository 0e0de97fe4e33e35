#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aupair/backends.hpp"
#include "aupair/evaluator.hpp"
#include "aupair/inference.hpp"
#include "aupair/pairgen.hpp"

namespace aupair {

struct RunConfig {
  std::filesystem::path problems;  // dataset JSONL
  std::filesystem::path workdir;

  std::array<double, 3> split_ratios{0.375, 0.125, 0.5};
  std::uint64_t split_seed = 0;

  // gateway
  std::string backend = "scripted";  // scripted | replay | http
  std::size_t gateway_parallelism = 1;
  GenerationSettings gen;
  std::filesystem::path ruleset;     // scripted
  std::filesystem::path replay_dir;  // replay
  std::string replay_fallback;       // "" = strict; "http" or "scripted" = permissive
  std::filesystem::path record_dir;  // record every response when set
  HttpConfig http;

  // budgets
  std::int64_t curate_budget = 0;   // 0: one call per problem
  std::int64_t pairgen_budget = 10'000;
  std::int64_t extract_budget = 0;  // 0: |C| x |D_val|
  int inference_n = 32;

  std::size_t k = 32;
  std::uint64_t pairgen_seed = 0;
  double tolerance = 1e-3;  // epsilon

  std::vector<Strategy> strategies{Strategy::aupair, Strategy::best_of_n, Strategy::self_repair,
                                   Strategy::random_pairs};
  SelfRepairPlan self_repair;
  std::uint64_t random_seed = 0;
  bool random_dedup = true;
  bool include_initial_guess = false;
  std::size_t eval_parallelism = 1;

  RunnerConfig runner;
  EvaluatorOptions evaluator;

  std::string python = "python3";
  bool normalize_identifiers = false;

  json to_json() const;
  std::string digest() const;
};

// Reads a TOML config; `overrides` are "dotted.key=value" strings applied on top,
// with values parsed as TOML (bare words fall back to strings). Relative paths
// resolve against the config file's directory. All validation errors are
// reported together in one ValidationError.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

}  // namespace aupair
