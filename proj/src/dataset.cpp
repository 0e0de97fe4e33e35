#include "aupair/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "aupair/error.hpp"
#include "aupair/evaluator.hpp"
#include "aupair/json_io.hpp"
#include "aupair/random.hpp"

namespace aupair {

void validate_problem(const Problem& p) {
  if (p.id.empty()) throw ValidationError("problem has an empty id");
  if (p.tests.empty()) throw ValidationError("problem has no tests");
  const bool any_expected = std::any_of(p.tests.begin(), p.tests.end(), [](const TestCase& t) {
    return !normalize_output(t.expected_output).empty();
  });
  if (!any_expected)
    throw ValidationError("problem '" + p.id + "' has no test with a non-empty expected output");
}

std::vector<Problem> load_dataset(const std::filesystem::path& path, DatasetFormat) {
  std::vector<Problem> out;
  std::map<std::string, std::size_t> seen;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    auto p = j.get<Problem>();
    validate_problem(p);
    if (auto [it, fresh] = seen.emplace(p.id, line); !fresh)
      throw ValidationError("duplicate id '" + p.id + "' (first seen on line " +
                            std::to_string(it->second) + ")");
    out.push_back(std::move(p));
  });
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Problem>& problems) {
  std::vector<json> records(problems.begin(), problems.end());
  write_file_atomic(path, to_jsonl(records));
}

std::vector<CuratedProblem> load_curated(const std::filesystem::path& path) {
  std::vector<CuratedProblem> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    auto c = j.get<CuratedProblem>();
    validate_problem(c.problem);
    if (!seen.insert(c.problem.id).second)
      throw ValidationError("duplicate id '" + c.problem.id + "'");
    out.push_back(std::move(c));
  });
  return out;
}

void save_curated(const std::filesystem::path& path, const std::vector<CuratedProblem>& problems) {
  std::vector<json> records(problems.begin(), problems.end());
  write_file_atomic(path, to_jsonl(records));
}

namespace {

void check_ratios(const SplitRatios& r) {
  for (double x : r)
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("split ratios must lie in [0,1]");
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
}

}  // namespace

std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * ratios[i];
    sizes[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    remainders[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b] + 1e-12;
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

SplitManifest plan_split(const std::vector<std::optional<std::string>>& strata,
                         const std::vector<std::string>& ids, const SplitRatios& ratios,
                         std::uint64_t seed) {
  check_ratios(ratios);
  if (ids.empty()) throw ValidationError("cannot split an empty dataset");

  // nullopt sorts first, so the unlabelled stratum is processed first.
  std::map<std::optional<std::string>, std::vector<std::size_t>> by_stratum;
  for (std::size_t i = 0; i < ids.size(); ++i) by_stratum[strata[i]].push_back(i);

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> members;
  for (auto& [label, indices] : by_stratum) {
    rng.shuffle(indices);
    const auto sizes = apportion(indices.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < sizes[s]; ++k) members[s].push_back(indices[pos++]);
  }

  SplitManifest m;
  m.seed = seed;
  m.ratios = ratios;
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(members[s].begin(), members[s].end());
    for (auto i : members[s]) m.ids[s].push_back(ids[i]);
  }
  return m;
}

SplitDataset stratified_split(const std::vector<Problem>& problems, const SplitRatios& ratios,
                              std::uint64_t seed) {
  std::vector<std::optional<std::string>> strata;
  std::vector<std::string> ids;
  for (const auto& p : problems) {
    strata.push_back(p.difficulty);
    ids.push_back(p.id);
  }
  const auto m = plan_split(strata, ids, ratios, seed);
  ProblemIndex index(problems);
  SplitDataset out;
  std::array<std::vector<Problem>*, 3> dest{&out.train, &out.val, &out.test};
  for (std::size_t s = 0; s < 3; ++s)
    for (const auto& id : m.ids[s]) dest[s]->push_back(index.at(id));
  return out;
}

SplitManifest stratified_split_manifest(const std::vector<CuratedProblem>& problems,
                                        const SplitRatios& ratios, std::uint64_t seed) {
  std::vector<std::optional<std::string>> strata;
  std::vector<std::string> ids;
  for (const auto& c : problems) {
    strata.push_back(c.problem.difficulty);
    ids.push_back(c.problem.id);
  }
  return plan_split(strata, ids, ratios, seed);
}

std::vector<CuratedProblem> select_split(const std::vector<CuratedProblem>& problems,
                                         const SplitManifest& manifest, std::size_t which) {
  std::map<std::string, const CuratedProblem*> by_id;
  for (const auto& c : problems) by_id[c.problem.id] = &c;
  std::vector<CuratedProblem> out;
  for (const auto& id : manifest.ids.at(which)) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw ValidationError("split manifest names unknown problem '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::string manifest_to_json(const SplitManifest& m) {
  json j{{"seed", m.seed},
         {"ratios", m.ratios},
         {"train", m.ids[0]},
         {"val", m.ids[1]},
         {"test", m.ids[2]}};
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    SplitManifest m;
    j.at("seed").get_to(m.seed);
    j.at("ratios").get_to(m.ratios);
    j.at("train").get_to(m.ids[0]);
    j.at("val").get_to(m.ids[1]);
    j.at("test").get_to(m.ids[2]);
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed split manifest: ") + e.what());
  }
}

}  // namespace aupair
