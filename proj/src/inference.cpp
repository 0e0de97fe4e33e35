#include "aupair/inference.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "aupair/digest.hpp"
#include "aupair/error.hpp"
#include "aupair/json_io.hpp"
#include "aupair/prompt.hpp"

namespace aupair {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::aupair: return "aupair";
    case Strategy::best_of_n: return "best_of_n";
    case Strategy::self_repair: return "self_repair";
    case Strategy::random_pairs: return "random_pairs";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "aupair") return Strategy::aupair;
  if (s == "best_of_n") return Strategy::best_of_n;
  if (s == "self_repair") return Strategy::self_repair;
  if (s == "random_pairs") return Strategy::random_pairs;
  throw ValidationError("unknown strategy '" + std::string(s) + "'");
}

std::string strategy_result_to_jsonl(const StrategyResult& r) {
  std::vector<json> lines;
  for (const auto& [pid, attempts] : r.per_problem)
    for (std::size_t i = 0; i < attempts.size(); ++i) {
      const auto& a = attempts[i];
      lines.push_back(json{{"problem_id", pid},
                           {"attempt", i},
                           {"call_index", a.call_index},
                           {"pair_id", a.pair_id},
                           {"score", a.attempt.score},
                           {"code_sha256", sha256_hex(a.attempt.code)},
                           {"attempt_record", a.attempt}});
    }
  return to_jsonl(lines);
}

StrategyResult load_strategy_result(const std::filesystem::path& path, Strategy strategy,
                                    int budget_per_problem) {
  StrategyResult r;
  r.strategy = strategy;
  r.budget_per_problem = budget_per_problem;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    StrategyAttempt a;
    a.attempt = j.at("attempt_record").get<Attempt>();
    a.call_index = j.at("call_index").get<std::int64_t>();
    a.pair_id = j.value("pair_id", std::string{});
    r.per_problem[j.at("problem_id").get<std::string>()].push_back(std::move(a));
  });
  return r;
}

std::int64_t planned_calls_per_problem(Strategy s, int n, std::size_t available_pairs,
                                       const SelfRepairPlan& plan) {
  switch (s) {
    case Strategy::aupair:
    case Strategy::random_pairs:
      return std::min<std::int64_t>(n, static_cast<std::int64_t>(available_pairs));
    case Strategy::best_of_n: return n;
    case Strategy::self_repair:
      return static_cast<std::int64_t>(plan.feedbacks) * (1 + plan.repairs_per_feedback);
  }
  return 0;
}

namespace {

// Runs `per_problem` for every test problem on a bounded pool and collects the
// attempt lists keyed by problem id.
template <typename Fn>
StrategyResult for_each_problem(const std::vector<CuratedProblem>& test, Strategy strategy,
                                int budget_per_problem, std::size_t parallelism, Fn per_problem) {
  StrategyResult result;
  result.strategy = strategy;
  result.budget_per_problem = budget_per_problem;
  for (const auto& c : test) result.per_problem[c.problem.id];

  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < test.size(); i = next++) {
      try {
        auto attempts = per_problem(test[i]);
        std::lock_guard lock(mutex);
        result.per_problem[test[i].problem.id] = std::move(attempts);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = test.size();
      }
    }
  };
  const auto threads = std::min(std::max<std::size_t>(1, parallelism), std::max<std::size_t>(1, test.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

void require_budget(const Budget& budget, std::int64_t needed, std::string_view what) {
  if (budget.remaining() < needed)
    throw BudgetExhausted(std::string(what) + " needs " + std::to_string(needed) +
                          " calls but only " + std::to_string(budget.remaining()) + " remain");
}

std::string attempt_id(Strategy s, const std::string& problem, std::size_t i) {
  return std::string(to_string(s)) + "/" + problem + "/" + std::to_string(i);
}

}  // namespace

StrategyResult run_pair_inference(const std::vector<CuratedProblem>& test,
                                  const std::vector<const CandidatePair*>& ordered_pairs,
                                  const ProblemIndex& pair_problems, int n, Gateway& gateway,
                                  Budget& budget, const CodeScorer& scorer,
                                  const InferenceOptions& options, Strategy label) {
  if (n < 0) throw ValidationError("inference budget must be non-negative");
  const auto used = static_cast<std::size_t>(
      planned_calls_per_problem(label, n, ordered_pairs.size()));
  require_budget(budget, static_cast<std::int64_t>(used * test.size()), to_string(label));
  const std::string tag(to_string(label));
  return for_each_problem(test, label, n, options.parallelism, [&](const CuratedProblem& target) {
    std::vector<StrategyAttempt> attempts;
    for (std::size_t i = 0; i < used; ++i) {
      const CandidatePair& pair = *ordered_pairs[i];
      RequestContext ctx;
      ctx.problem_id = target.problem.id;
      ctx.pair_ids = {pair.id()};
      ctx.pair_problem_ids = {pair.problem_id()};
      ctx.guess_code = target.guess.code;
      ctx.attempt_index = static_cast<std::int64_t>(i);
      const auto spec =
          make_repair_spec({&pair}, pair_problems, target.problem, target.guess, options.gen.style);
      const auto record =
          gateway.generate(make_request(build_repair_prompt(spec), tag, options.gen, ctx), budget);
      attempts.push_back({score_response(record.response_text,
                                         attempt_id(label, target.problem.id, i), target.problem,
                                         scorer, target.guess.id),
                          record.call_index, pair.id()});
    }
    return attempts;
  });
}

StrategyResult run_best_of_n(const std::vector<CuratedProblem>& test, int n, Gateway& gateway,
                             Budget& budget, const CodeScorer& scorer,
                             const InferenceOptions& options) {
  if (n < 1) throw ValidationError("best-of-N needs N >= 1");
  require_budget(budget, static_cast<std::int64_t>(n) * static_cast<std::int64_t>(test.size()),
                 "best_of_n");
  return for_each_problem(test, Strategy::best_of_n, n, options.parallelism,
                          [&](const CuratedProblem& target) {
    RepairPromptSpec spec;
    spec.target_question = target.problem.description;
    spec.target_code = target.guess.code;
    spec.target_score = target.guess.score;
    spec.style = options.gen.style;
    const std::string prompt = build_repair_prompt_allow_empty(spec);
    std::vector<StrategyAttempt> attempts;
    for (int i = 0; i < n; ++i) {
      RequestContext ctx;
      ctx.problem_id = target.problem.id;
      ctx.guess_code = target.guess.code;
      ctx.attempt_index = i;
      const auto record =
          gateway.generate(make_request(prompt, "best_of_n", options.gen, ctx), budget);
      attempts.push_back({score_response(record.response_text,
                                         attempt_id(Strategy::best_of_n, target.problem.id,
                                                    static_cast<std::size_t>(i)),
                                         target.problem, scorer, target.guess.id),
                          record.call_index, ""});
    }
    return attempts;
  });
}

StrategyResult run_self_repair(const std::vector<CuratedProblem>& test, int n,
                               const SelfRepairPlan& plan, Gateway& gateway, Budget& budget,
                               const CodeScorer& scorer, const InferenceOptions& options) {
  if (plan.feedbacks < 1 || plan.repairs_per_feedback < 1)
    throw ValidationError("self-repair needs at least one feedback and one repair per feedback");
  const std::int64_t per_problem =
      planned_calls_per_problem(Strategy::self_repair, n, 0, plan);
  if (per_problem > n)
    throw ValidationError("self-repair plan f*(1+r) = " + std::to_string(per_problem) +
                          " exceeds N = " + std::to_string(n));
  require_budget(budget, per_problem * static_cast<std::int64_t>(test.size()), "self_repair");
  return for_each_problem(test, Strategy::self_repair, n, options.parallelism,
                          [&](const CuratedProblem& target) {
    std::vector<StrategyAttempt> attempts;
    std::int64_t ordinal = 0;
    for (int f = 0; f < plan.feedbacks; ++f) {
      RequestContext ctx;
      ctx.problem_id = target.problem.id;
      ctx.guess_code = target.guess.code;
      ctx.attempt_index = ordinal++;
      const auto feedback = gateway.generate(
          make_request(build_feedback_prompt(target.problem, target.guess), "feedback",
                       options.gen, ctx),
          budget);
      const std::string prompt =
          build_feedback_repair_prompt(target.problem, target.guess, feedback.response_text);
      for (int r = 0; r < plan.repairs_per_feedback; ++r) {
        ctx.attempt_index = ordinal++;
        const auto record = gateway.generate(make_request(prompt, "repair", options.gen, ctx), budget);
        attempts.push_back({score_response(record.response_text,
                                           attempt_id(Strategy::self_repair, target.problem.id,
                                                      attempts.size()),
                                           target.problem, scorer, target.guess.id),
                            record.call_index, ""});
      }
    }
    return attempts;
  });
}

MetricsReport compute_metrics(const StrategyResult& result, const std::vector<CuratedProblem>& test,
                              bool include_initial_guess, std::optional<std::size_t> first_n) {
  ProblemIndex index(test);
  for (const auto& [pid, _] : result.per_problem)
    if (!index.contains(pid))
      throw ValidationError("result names problem '" + pid + "' absent from the test set");

  struct Acc {
    std::size_t n = 0;
    double pass = 0.0, strict = 0.0;
  };
  Acc total;
  std::map<std::string, Acc> by_difficulty, by_category;
  for (const auto& c : test) {
    double best = 0.0;
    bool solved = false;
    auto consider = [&](const Attempt& a) {
      best = std::max(best, a.score);
      solved = solved || a.solved();
    };
    if (include_initial_guess) consider(c.guess);
    if (auto it = result.per_problem.find(c.problem.id); it != result.per_problem.end()) {
      const std::size_t limit = first_n ? std::min(*first_n, it->second.size()) : it->second.size();
      for (std::size_t i = 0; i < limit; ++i) consider(it->second[i].attempt);
    }
    auto add = [&](Acc& acc) {
      ++acc.n;
      acc.pass += best;
      acc.strict += solved ? 1.0 : 0.0;
    };
    add(total);
    add(by_difficulty[c.problem.difficulty.value_or(std::string(kUnlabeled))]);
    if (c.problem.categories.empty())
      add(by_category[std::string(kUnlabeled)]);
    else
      for (const auto& cat : c.problem.categories) add(by_category[cat]);
  }
  auto finish = [](const Acc& a) {
    BucketMetrics b;
    b.n_problems = a.n;
    if (a.n) {
      b.test_pass_rate = a.pass / static_cast<double>(a.n);
      b.strict_accuracy = a.strict / static_cast<double>(a.n);
    }
    return b;
  };
  MetricsReport report;
  const auto overall = finish(total);
  report.n_problems = overall.n_problems;
  report.test_pass_rate = overall.test_pass_rate;
  report.strict_accuracy = overall.strict_accuracy;
  for (const auto& [k, v] : by_difficulty) report.per_difficulty[k] = finish(v);
  for (const auto& [k, v] : by_category) report.per_category[k] = finish(v);
  return report;
}

json metrics_to_json(const MetricsReport& m) {
  auto buckets = [](const std::map<std::string, BucketMetrics>& b) {
    json out = json::object();
    for (const auto& [k, v] : b)
      out[k] = {{"n_problems", v.n_problems},
                {"test_pass_rate", v.test_pass_rate},
                {"strict_accuracy", v.strict_accuracy}};
    return out;
  };
  return json{{"test_pass_rate", m.test_pass_rate},
              {"strict_accuracy", m.strict_accuracy},
              {"n_problems", m.n_problems},
              {"per_difficulty", buckets(m.per_difficulty)},
              {"per_category", buckets(m.per_category)}};
}

}  // namespace aupair
