#include "aupair/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "aupair/digest.hpp"
#include "aupair/error.hpp"
#include "aupair/json_io.hpp"
#include "aupair/process.hpp"

namespace aupair {

namespace {

// Reads a JSON list of sources from argv[1] and prints a JSON list of trees, each
// [kind, label, children] or null when parsing fails.
constexpr const char* kDumpScript = R"PY(
import ast, json, sys
SKIP = {"ctx", "type_comment", "type_ignores", "kind"}
IDENT = {"id", "arg", "name", "attr", "asname", "module"}
NORM = "--normalize-identifiers" in sys.argv
sys.setrecursionlimit(10000)
def conv(node):
    label, kids = [], []
    for field, value in ast.iter_fields(node):
        if field in SKIP or value is None:
            continue
        if isinstance(value, ast.AST):
            label.append(field)
            kids.append(conv(value))
        elif isinstance(value, list):
            label.append("%s#%d" % (field, len(value)))
            for v in value:
                if isinstance(v, ast.AST):
                    kids.append(conv(v))
                else:
                    label.append("%s=%s" % (field, "_" if NORM and field in IDENT else repr(v)))
        else:
            label.append("%s=%s" % (field, "_" if NORM and field in IDENT else repr(value)))
    return [type(node).__name__, ";".join(label), kids]
out = []
for src in json.load(open(sys.argv[1], encoding="utf-8")):
    try:
        out.append(conv(ast.parse(src)))
    except (SyntaxError, ValueError, RecursionError, MemoryError):
        out.append(None)
json.dump(out, sys.stdout)
)PY";

AstNode node_from_json(const json& j) {
  AstNode n;
  n.kind = j.at(0).get<std::string>();
  n.label = j.at(1).get<std::string>();
  for (const auto& c : j.at(2)) n.children.push_back(node_from_json(c));
  return n;
}

std::string collect(const AstNode& node, std::set<std::string>& out) {
  std::string material = node.kind;
  material += '\x1f';
  material += node.label;
  material += '\x1f';
  for (const auto& c : node.children) {
    material += collect(c, out);
    material += ',';
  }
  auto digest = sha256_hex(material);
  out.insert(digest);
  return digest;
}

}  // namespace

PythonAstParser::PythonAstParser(std::string python, bool normalize_identifiers)
    : python_(std::move(python)), normalize_identifiers_(normalize_identifiers) {}

std::vector<std::optional<AstNode>> PythonAstParser::parse(const std::vector<std::string>& sources) {
  if (sources.empty()) return {};
  namespace fs = std::filesystem;
  char dir_template[] = "/tmp/aupair-ast-XXXXXX";
  if (!::mkdtemp(dir_template)) throw EnvironmentError("cannot create temp dir for AST parsing");
  const fs::path dir(dir_template);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{dir};
  write_file_atomic(dir / "dump_ast.py", kDumpScript);
  write_file_atomic(dir / "batch.json", json(sources).dump());

  std::vector<std::string> argv{python_, (dir / "dump_ast.py").string(),
                                (dir / "batch.json").string()};
  if (normalize_identifiers_) argv.push_back("--normalize-identifiers");
  const auto r = run_process(argv, std::chrono::minutes(10), std::size_t{1} << 31);
  if (r.timed_out || r.exit_code != 0)
    throw EnvironmentError("AST helper failed: " + r.stderr_data.substr(0, 2000));
  const auto doc = json::parse(r.stdout_data);
  std::vector<std::optional<AstNode>> out;
  for (const auto& t : doc) {
    if (t.is_null())
      out.emplace_back(std::nullopt);
    else
      out.emplace_back(node_from_json(t));
  }
  if (out.size() != sources.size()) throw EnvironmentError("AST helper returned a short batch");
  return out;
}

SubtreeSet subtree_set(const AstNode& root) {
  SubtreeSet s;
  collect(root, s.digests);
  return s;
}

SubtreeSet subtree_set(const std::optional<AstNode>& root) {
  if (!root) return SubtreeSet{{}, false};
  return subtree_set(*root);
}

std::set<std::string> set_difference(const SubtreeSet& a, const SubtreeSet& b) {
  std::set<std::string> out;
  std::set_difference(a.digests.begin(), a.digests.end(), b.digests.begin(), b.digests.end(),
                      std::inserter(out, out.end()));
  return out;
}

DiversityReport diversity_from_sets(const std::vector<SubtreeSet>& guesses,
                                    const std::vector<std::vector<SubtreeSet>>& fixes,
                                    std::size_t n) {
  if (guesses.size() != fixes.size()) throw ValidationError("guess/fix list length mismatch");
  DiversityReport r;
  r.n = n;
  std::size_t total = 0, parsed = 0;
  std::size_t sum = 0;
  for (std::size_t i = 0; i < guesses.size(); ++i) {
    ++total;
    parsed += guesses[i].parsed ? 1 : 0;
    std::set<std::string> diff;
    for (const auto& f : fixes[i]) {
      ++total;
      parsed += f.parsed ? 1 : 0;
      auto d = set_difference(f, guesses[i]);
      diff.insert(d.begin(), d.end());
    }
    r.per_problem_diff_counts.push_back(diff.size());
    r.s_max = std::max(r.s_max, diff.size());
    sum += diff.size();
  }
  r.unparsed = total - parsed;
  r.all_unparsed = total > 0 && parsed == 0;
  if (r.s_max > 0 && n > 0 && !guesses.empty())
    r.delta = static_cast<double>(sum) /
              (static_cast<double>(n) * static_cast<double>(guesses.size()) *
               static_cast<double>(r.s_max));
  return r;
}

DiversityReport diversity_score(const StrategyResult& result, const std::vector<CuratedProblem>& test,
                                std::size_t n, AstParser& parser) {
  std::vector<std::string> sources;
  std::vector<std::vector<std::size_t>> fix_slots(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) sources.push_back(test[i].guess.code);
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto it = result.per_problem.find(test[i].problem.id);
    if (it == result.per_problem.end()) continue;
    if (it->second.size() > n)
      throw ValidationError("problem '" + test[i].problem.id + "' has more than N attempts");
    for (const auto& a : it->second) {
      if (a.attempt.code.empty()) continue;
      fix_slots[i].push_back(sources.size());
      sources.push_back(a.attempt.code);
    }
  }
  const auto trees = parser.parse(sources);
  std::vector<SubtreeSet> guesses;
  std::vector<std::vector<SubtreeSet>> fixes(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    guesses.push_back(subtree_set(trees[i]));
    for (auto slot : fix_slots[i]) fixes[i].push_back(subtree_set(trees[slot]));
  }
  return diversity_from_sets(guesses, fixes, n);
}

json diversity_to_json(const DiversityReport& r) {
  return json{{"delta", r.delta},
              {"per_problem_diff_counts", r.per_problem_diff_counts},
              {"s_max", r.s_max},
              {"n", r.n},
              {"unparsed", r.unparsed},
              {"all_unparsed", r.all_unparsed}};
}

std::map<std::size_t, std::size_t> lineage_histogram(const PairStore& store) {
  std::map<std::string, const Attempt*> attempts;
  for (const auto& p : store.pairs()) {
    attempts.emplace(p.guess().id, &p.guess());
    attempts.emplace(p.fix().id, &p.fix());
  }
  std::map<std::string, std::size_t> memo;
  auto depth_of = [&](const Attempt& start) {
    std::vector<const Attempt*> chain;
    std::set<std::string> on_chain;
    const Attempt* a = &start;
    std::size_t base = 0;
    for (;;) {
      if (auto m = memo.find(a->id); m != memo.end()) {
        base = m->second;
        break;
      }
      if (!on_chain.insert(a->id).second)
        throw ValidationError("lineage cycle through attempt '" + a->id + "'");
      chain.push_back(a);
      if (!a->parent_attempt) {
        base = 0;
        chain.pop_back();
        memo[a->id] = 0;
        break;
      }
      auto it = attempts.find(*a->parent_attempt);
      if (it == attempts.end())
        throw ValidationError("attempt '" + a->id + "' names unknown parent '" +
                              *a->parent_attempt + "'");
      a = it->second;
    }
    for (auto rit = chain.rbegin(); rit != chain.rend(); ++rit) memo[(*rit)->id] = ++base;
    return memo.at(start.id);
  };
  std::map<std::size_t, std::size_t> hist;
  for (const auto& p : store.pairs())
    ++hist[p.fix().parent_attempt ? depth_of(p.fix()) : depth_of(p.guess()) + 1];
  return hist;
}

std::vector<BreakdownRow> breakdown(const StrategyResult& result,
                                    const std::vector<CuratedProblem>& test, BreakdownAxis axis) {
  std::map<std::string, std::vector<CuratedProblem>> buckets;
  for (const auto& c : test) {
    if (axis == BreakdownAxis::difficulty) {
      buckets[c.problem.difficulty.value_or(std::string(kUnlabeled))].push_back(c);
    } else if (c.problem.categories.empty()) {
      buckets[std::string(kUnlabeled)].push_back(c);
    } else {
      for (const auto& cat : c.problem.categories) buckets[cat].push_back(c);
    }
  }
  std::vector<BreakdownRow> rows;
  for (const auto& [name, problems] : buckets) {
    StrategyResult sub;
    sub.strategy = result.strategy;
    sub.budget_per_problem = result.budget_per_problem;
    for (const auto& c : problems)
      if (auto it = result.per_problem.find(c.problem.id); it != result.per_problem.end())
        sub.per_problem[c.problem.id] = it->second;
    const auto m = compute_metrics(sub, problems);
    StrategyResult none;
    const auto initial = compute_metrics(none, problems, /*include_initial_guess=*/true);
    BreakdownRow row;
    row.bucket = name;
    row.n_problems = problems.size();
    row.test_pass_rate = m.test_pass_rate;
    row.strict_accuracy = m.strict_accuracy;
    row.initial_test_pass_rate = initial.test_pass_rate;
    row.initial_strict_accuracy = initial.strict_accuracy;
    row.test_pass_rate_gain = m.test_pass_rate - initial.test_pass_rate;
    row.strict_accuracy_gain = m.strict_accuracy - initial.strict_accuracy;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string breakdown_csv(const std::vector<BreakdownRow>& rows) {
  std::ostringstream out;
  out << "bucket,n_problems,test_pass_rate,strict_accuracy,initial_test_pass_rate,"
         "initial_strict_accuracy,test_pass_rate_gain,strict_accuracy_gain\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.bucket.c_str(),
                  r.n_problems, r.test_pass_rate, r.strict_accuracy, r.initial_test_pass_rate,
                  r.initial_strict_accuracy, r.test_pass_rate_gain, r.strict_accuracy_gain);
    out << buf;
  }
  return out.str();
}

std::map<std::string, std::size_t> pair_category_distribution(
    const std::vector<const CandidatePair*>& pairs, const ProblemIndex& problems) {
  std::map<std::string, std::size_t> out;
  for (const auto* p : pairs) {
    const auto& prob = problems.at(p->problem_id());
    if (prob.categories.empty())
      ++out[std::string(kUnlabeled)];
    else
      for (const auto& c : prob.categories) ++out[c];
  }
  return out;
}

}  // namespace aupair
