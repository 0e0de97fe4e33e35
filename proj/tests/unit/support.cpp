#include "support.hpp"

#include <cstdlib>
#include <regex>

#include "aupair/process.hpp"

namespace aupair::testing {

TempDir::TempDir() {
  std::string templ = (std::filesystem::temp_directory_path() / "aupair-test-XXXXXX").string();
  if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Problem make_problem(const std::string& id, std::size_t n_tests, std::optional<std::string> difficulty,
                     std::vector<std::string> categories) {
  Problem p;
  p.id = id;
  p.description = "Problem " + id + ".";
  for (std::size_t i = 0; i < n_tests; ++i)
    p.tests.push_back({std::to_string(i), std::to_string(i) + "\n"});
  p.difficulty = std::move(difficulty);
  p.categories = std::move(categories);
  p.source = "test";
  return p;
}

EvalOutcome FakeScorer::score_code(std::string_view code, const Problem& problem) const {
  static const std::regex re("pass=(all|[0-9]+)");
  std::size_t k = 0;
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(code.begin(), code.end(), m, re))
    k = m[1] == "all" ? problem.tests.size() : std::stoul(m[1].str());
  EvalOutcome out;
  for (std::size_t i = 0; i < problem.tests.size(); ++i)
    out.verdicts.push_back(i < k ? Verdict::pass : Verdict::wrong_output);
  out.score = pass_fraction(out.verdicts);
  return out;
}

std::string fake_code(const std::string& k, const std::string& tag) {
  return "def solve(s):\n    # pass=" + k + (tag.empty() ? "" : " " + tag) + "\n    print(s)\n";
}

std::string fenced(const std::string& code) { return "```python\n" + code + "```\n"; }

Attempt fake_attempt(const std::string& id, std::size_t passed, std::size_t total) {
  std::vector<Verdict> v(total, Verdict::wrong_output);
  for (std::size_t i = 0; i < passed; ++i) v[i] = Verdict::pass;
  return Attempt::from_verdicts(id, fake_code(std::to_string(passed), id), v);
}

std::string stub_runner() { return AUPAIR_STUB_RUNNER; }

std::string python() { return find_executable("python3"); }

std::filesystem::path source_dir() { return AUPAIR_SOURCE_DIR; }

}  // namespace aupair::testing
