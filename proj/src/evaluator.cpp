#include "aupair/evaluator.hpp"

#include <stdlib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "aupair/digest.hpp"
#include "aupair/error.hpp"
#include "aupair/process.hpp"

namespace aupair {

namespace fs = std::filesystem;

std::string normalize_output(std::string_view raw) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    auto line = raw.substr(start, end - start);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r' ||
                             line.back() == '\f' || line.back() == '\v'))
      line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

namespace {

std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::optional<double> as_number(const std::string& t) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "aupair-eval-XXXXXX").string();
    if (!::mkdtemp(pattern.data()))
      throw EnvironmentError("cannot create temporary directory under " +
                             fs::temp_directory_path().string());
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw EnvironmentError("cannot write " + p.string());
}

constexpr std::size_t kDiagnosticCap = 4096;

}  // namespace

bool numeric_equal(std::string_view actual, std::string_view expected, double tolerance) {
  const auto a = tokens(actual), e = tokens(expected);
  if (a.size() != e.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == e[i]) continue;
    auto x = as_number(a[i]), y = as_number(e[i]);
    if (!x || !y) return false;
    if (std::abs(*x - *y) > tolerance * std::max(1.0, std::abs(*y))) return false;
  }
  return true;
}

Attempt CodeScorer::score_attempt(std::string id, std::string code, const Problem& problem,
                                  std::optional<std::string> parent) const {
  auto outcome = score_code(code, problem);
  return Attempt::from_verdicts(std::move(id), std::move(code), std::move(outcome.verdicts),
                                std::move(parent));
}

Evaluator::Evaluator(RunnerConfig runner, EvaluatorOptions options)
    : runner_(std::move(runner)), options_(std::move(options)) {
  if (runner_.command.empty()) throw EnvironmentError("runner command is empty");
  if (find_executable(runner_.command.front()).empty())
    throw EnvironmentError("runner executable '" + runner_.command.front() + "' not found");
  if (options_.limits.wall_timeout.count() <= 0)
    throw ValidationError("wall timeout must be positive");
  options_.parallelism = std::max<std::size_t>(1, options_.parallelism);
}

std::size_t Evaluator::runner_invocations() const {
  std::lock_guard lock(mutex_);
  return invocations_;
}

Verdict Evaluator::judge(const TestCase& test, const ProcessResult& r) const {
  if (r.timed_out) return Verdict::timeout;
  if (r.output_limit_exceeded || r.signaled) return Verdict::runtime_error;
  switch (r.exit_code) {
    case 0: {
      const auto got = normalize_output(r.stdout_data);
      const auto want = normalize_output(test.expected_output);
      const bool ok = options_.numeric_tolerance
                          ? numeric_equal(got, want, *options_.numeric_tolerance)
                          : got == want;
      return ok ? Verdict::pass : Verdict::wrong_output;
    }
    case 1: return Verdict::runtime_error;
    default: return Verdict::protocol_error;
  }
}

EvalOutcome Evaluator::run_all(std::string_view code, const Problem& problem) const {
  if (problem.tests.empty()) throw ValidationError("problem '" + problem.id + "' has no tests");
  TempDir dir;
  const auto code_file = dir.path() / "candidate.py";
  write_bytes(code_file, code);
  const std::size_t n = problem.tests.size();
  for (std::size_t i = 0; i < n; ++i)
    write_bytes(dir.path() / ("input_" + std::to_string(i) + ".txt"), problem.tests[i].input);

  EvalOutcome outcome;
  outcome.verdicts.assign(n, Verdict::protocol_error);
  outcome.diagnostics.assign(n, {});

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        auto argv = runner_.command;
        argv.push_back(code_file.string());
        argv.push_back((dir.path() / ("input_" + std::to_string(i) + ".txt")).string());
        auto r = run_process(argv, options_.limits.wall_timeout, options_.limits.max_output_bytes);
        outcome.verdicts[i] = judge(problem.tests[i], r);
        outcome.diagnostics[i] = r.stderr_data.substr(0, kDiagnosticCap);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t threads = std::min(options_.parallelism, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  {
    std::lock_guard lock(mutex_);
    invocations_ += n;
  }
  outcome.score = pass_fraction(outcome.verdicts);
  return outcome;
}

EvalOutcome Evaluator::score_code(std::string_view code, const Problem& problem) const {
  if (!options_.memoize) return run_all(code, problem);
  const std::string key = problem.id + "\n" + sha256_hex(code);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  auto outcome = run_all(code, problem);
  std::lock_guard lock(mutex_);
  memo_.emplace(key, outcome);
  return outcome;
}

}  // namespace aupair
