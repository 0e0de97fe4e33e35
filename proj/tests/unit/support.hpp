#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "aupair/evaluator.hpp"
#include "aupair/types.hpp"

namespace aupair::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Problem with `n_tests` trivial tests.
Problem make_problem(const std::string& id, std::size_t n_tests = 4,
                     std::optional<std::string> difficulty = std::nullopt,
                     std::vector<std::string> categories = {});

// Passes the first K tests when the code contains "pass=K"; "pass=all" passes every test.
class FakeScorer final : public CodeScorer {
 public:
  EvalOutcome score_code(std::string_view code, const Problem& problem) const override;
};

// Fenced code whose fake score is K tests passed; `tag` keeps otherwise equal codes distinct.
std::string fake_code(const std::string& k, const std::string& tag = "");
std::string fenced(const std::string& code);

Attempt fake_attempt(const std::string& id, std::size_t passed, std::size_t total);

std::string stub_runner();
std::string python();
std::filesystem::path source_dir();

}  // namespace aupair::testing
