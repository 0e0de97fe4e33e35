#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aupair/types.hpp"

namespace aupair {

enum class DatasetFormat { jsonl };

// Loads and validates problem records, one JSON object per line.
std::vector<Problem> load_dataset(const std::filesystem::path& path,
                                  DatasetFormat format = DatasetFormat::jsonl);
void save_dataset(const std::filesystem::path& path, const std::vector<Problem>& problems);

std::vector<CuratedProblem> load_curated(const std::filesystem::path& path);
void save_curated(const std::filesystem::path& path, const std::vector<CuratedProblem>& problems);

// Throws ValidationError for an empty test list or a test set whose expected
// outputs are all blank after normalization.
void validate_problem(const Problem& p);

using SplitRatios = std::array<double, 3>;  // train, val, test

struct SplitDataset {
  std::vector<Problem> train, val, test;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  SplitRatios ratios{};
  std::array<std::vector<std::string>, 3> ids;  // train, val, test

  bool operator==(const SplitManifest&) const = default;
};

// Largest-remainder apportionment of `n` items over `ratios`; ties go to the
// earlier split.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios);

// Shuffles each difficulty stratum with `seed` and apportions it over the three
// splits. Unlabelled problems form a stratum of their own.
SplitManifest plan_split(const std::vector<std::optional<std::string>>& strata,
                         const std::vector<std::string>& ids, const SplitRatios& ratios,
                         std::uint64_t seed);

SplitDataset stratified_split(const std::vector<Problem>& problems, const SplitRatios& ratios,
                              std::uint64_t seed);
SplitManifest stratified_split_manifest(const std::vector<CuratedProblem>& problems,
                                        const SplitRatios& ratios, std::uint64_t seed);

// Selects the curated problems named by one split of the manifest, in manifest order.
std::vector<CuratedProblem> select_split(const std::vector<CuratedProblem>& problems,
                                         const SplitManifest& manifest, std::size_t which);

std::string manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(const std::string& text);

}  // namespace aupair
