#include "aupair/pipeline.hpp"

#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "aupair/analysis.hpp"
#include "aupair/backends.hpp"
#include "aupair/dataset.hpp"
#include "aupair/digest.hpp"
#include "aupair/error.hpp"
#include "aupair/extraction.hpp"
#include "aupair/json_io.hpp"
#include "aupair/pairgen.hpp"

namespace aupair {

namespace fs = std::filesystem;

fs::path meta_path(const fs::path& artifact) {
  fs::path p = artifact;
  p += ".meta.json";
  return p;
}

namespace {

std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

void require(const fs::path& p, const std::string& what, const std::string& command) {
  if (!fs::exists(p)) throw MissingArtifact("missing " + what + "; run " + command);
}

json provenance(const RunConfig& config, const std::string& command,
                const std::vector<fs::path>& upstream) {
  json up = json::object();
  for (const auto& p : upstream) up[p.filename().string()] = file_digest(p);
  return json{{"command", command}, {"config_digest", config.digest()}, {"upstream", up}};
}

// Writes a non-JSON artifact plus a sidecar carrying its digest and provenance.
void write_with_meta(const fs::path& path, const std::string& content, json prov) {
  write_file_atomic(path, content);
  prov["artifact"] = path.filename().string();
  prov["sha256"] = sha256_hex(content);
  write_file_atomic(meta_path(path), prov.dump(2) + "\n");
}

void write_json(const fs::path& path, json body, const json& prov) {
  body["provenance"] = prov;
  write_file_atomic(path, body.dump(2) + "\n");
}

struct Session {
  std::shared_ptr<RunLog> log;
  Gateway gateway;
  Evaluator evaluator;

  Session(const RunConfig& config, const std::string& command)
      : log(std::make_shared<RunLog>(Workdir{config.workdir}.run_log(command))),
        gateway(make_backend(config), log, config.gateway_parallelism),
        evaluator(config.runner, config.evaluator) {}
};

std::vector<CuratedProblem> load_split_part(const RunConfig& config, std::size_t which) {
  Workdir w{config.workdir};
  require(w.curated(), "curated dataset", "curate");
  require(w.split(), "split manifest", "split");
  auto curated = load_curated(w.curated());
  auto manifest = manifest_from_json(read_file(w.split()));
  return select_split(curated, manifest, which);
}

std::size_t eligible_random_pairs(const PairStore& store, bool dedup) {
  if (!dedup) return store.size();
  std::set<std::string> problems;
  for (const auto& p : store.pairs()) problems.insert(p.problem_id());
  return problems.size();
}

}  // namespace

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
  auto scripted = [&] {
    return scripted_oracle(load_ruleset(config.ruleset));
  };
  std::shared_ptr<Backend> backend;
  if (config.backend == "scripted") {
    backend = scripted();
  } else if (config.backend == "http") {
    backend = std::make_shared<HttpBackend>(config.http);
  } else if (config.backend == "replay") {
    std::shared_ptr<Backend> fallback;
    if (config.replay_fallback == "http") fallback = std::make_shared<HttpBackend>(config.http);
    if (config.replay_fallback == "scripted") fallback = scripted();
    backend = std::make_shared<ReplayBackend>(std::make_shared<ReplayStore>(config.replay_dir),
                                              fallback);
  } else {
    throw ValidationError("unknown backend '" + config.backend + "'");
  }
  if (!config.record_dir.empty())
    backend = std::make_shared<RecordingBackend>(backend,
                                                 std::make_shared<ReplayStore>(config.record_dir));
  return backend;
}

json cmd_curate(const RunConfig& config) {
  Workdir w{config.workdir};
  fs::create_directories(w.root);
  auto problems = load_dataset(config.problems);
  Session s(config, "curate");
  Budget budget(config.curate_budget > 0 ? config.curate_budget
                                         : static_cast<std::int64_t>(problems.size()));
  auto result = curate_guesses(problems, s.gateway, budget, s.evaluator, config.gen);
  auto prov = provenance(config, "curate", {config.problems});
  write_with_meta(w.curated(), to_jsonl({result.curated.begin(), result.curated.end()}), prov);
  auto report = json::parse(curation_report_to_json(result.report));
  write_json(w.curation_report(), report, prov);
  spdlog::info("curate: {} of {} problems retained", result.report.retained, result.report.total);
  report["calls"] = budget.used();
  return report;
}

json cmd_split(const RunConfig& config) {
  Workdir w{config.workdir};
  require(w.curated(), "curated dataset", "curate");
  auto curated = load_curated(w.curated());
  auto manifest = stratified_split_manifest(curated, config.split_ratios, config.split_seed);
  auto body = json::parse(manifest_to_json(manifest));
  write_json(w.split(), body, provenance(config, "split", {w.curated()}));
  return json{{"train", manifest.ids[0].size()},
              {"val", manifest.ids[1].size()},
              {"test", manifest.ids[2].size()}};
}

json cmd_pairgen(const RunConfig& config) {
  Workdir w{config.workdir};
  auto train = load_split_part(config, 0);
  if (train.empty()) throw ValidationError("training split is empty");
  Session s(config, "pairgen");
  Budget budget(config.pairgen_budget);
  PairGenOptions opts;
  opts.calls = config.pairgen_budget;
  opts.k = config.k;
  opts.seed = config.pairgen_seed;
  opts.gen = config.gen;
  auto result = generate_pairs(train, s.gateway, budget, s.evaluator, opts);

  auto prov = provenance(config, "pairgen", {w.curated(), w.split()});
  std::vector<json> pairs;
  for (const auto& p : result.store.pairs()) pairs.push_back(pair_to_json(p));
  write_with_meta(w.pairs(), to_jsonl(pairs), prov);
  std::vector<json> events;
  for (const auto& e : result.events) events.push_back(event_to_json(e));
  write_with_meta(w.pairgen_trace(), to_jsonl(events), prov);
  spdlog::info("pairgen: {} pairs from {} calls", result.store.size(), budget.used());
  return json{{"pairs", result.store.size()},
              {"calls", budget.used()},
              {"remaining_instances", result.remaining.size()}};
}

json cmd_extract(const RunConfig& config, bool reuse_matrix) {
  Workdir w{config.workdir};
  require(w.pairs(), "candidate pairs", "pairgen");
  auto val = load_split_part(config, 1);
  auto curated = load_curated(w.curated());
  ProblemIndex index(curated);
  auto store = PairStore::load(w.pairs());

  json wanted = provenance(config, "extract", {w.curated(), w.split(), w.pairs()});
  // The matrix depends on the pairs, the validation split and generation settings,
  // not on the tolerance; a matching matrix is reused.
  json matrix_key = {{"upstream", wanted["upstream"]},
                     {"temperature", config.gen.temperature},
                     {"max_tokens", config.gen.max_tokens},
                     {"stop", config.gen.stop_sequences},
                     {"style", std::string(to_string(config.gen.style))},
                     {"runner", config.runner.command}};
  FixQualityMatrix m;
  bool reused = false;
  std::int64_t calls = 0;
  if (reuse_matrix && fs::exists(w.matrix())) {
    auto existing = load_matrix(w.matrix());
    if (existing.provenance.value("inputs", json()) == matrix_key) {
      m = std::move(existing);
      reused = true;
    }
  }
  if (!reused) {
    Session s(config, "extract");
    const auto planned = static_cast<std::int64_t>(store.size() * val.size());
    Budget budget(config.extract_budget > 0 ? config.extract_budget : planned);
    MatrixOptions opts;
    opts.gen = config.gen;
    opts.parallelism = config.eval_parallelism;
    m = compute_fix_quality_matrix(store, index, val, s.gateway, budget, s.evaluator, opts);
    m.provenance = wanted;
    m.provenance["inputs"] = matrix_key;
    save_matrix(w.matrix(), m);
    calls = budget.used();
  }
  auto list = extract_aupairs(m, config.tolerance);
  write_with_meta(w.aupairs(), aupairs_to_jsonl(list),
                  provenance(config, "extract", {w.pairs(), w.matrix()}));
  spdlog::info("extract: {} AuPairs from a {}x{} matrix", list.size(), m.rows(), m.cols());
  return json{{"aupairs", list.size()},
              {"rows", m.rows()},
              {"cols", m.cols()},
              {"matrix_reused", reused},
              {"calls", calls}};
}

json cmd_eval(const RunConfig& config, const std::vector<Strategy>& strategies, std::optional<int> n_override) {
  Workdir w{config.workdir};
  const int n = n_override.value_or(config.inference_n);
  if (n <= 0) throw ValidationError("inference budget must be positive");
  auto test = load_split_part(config, 2);
  if (test.empty()) throw ValidationError("test split is empty");
  auto curated = load_curated(w.curated());
  ProblemIndex index(curated);
  const auto& chosen = strategies.empty() ? config.strategies : strategies;

  // Validate every upstream requirement before spending any calls.
  for (auto s : chosen) {
    if (s == Strategy::aupair) require(w.aupairs(), "AuPairList", "extract");
    if (s == Strategy::aupair || s == Strategy::random_pairs)
      require(w.pairs(), "candidate pairs", "pairgen");
    if (s == Strategy::self_repair &&
        config.self_repair.feedbacks * (1 + config.self_repair.repairs_per_feedback) > n)
      throw ValidationError("self-repair plan needs more than " + std::to_string(n) + " calls");
  }

  fs::create_directories(w.root / "results");
  fs::create_directories(w.root / "metrics");
  json summary = json::object();
  InferenceOptions opts;
  opts.gen = config.gen;
  opts.parallelism = config.eval_parallelism;

  for (auto strategy : chosen) {
    const std::string name(to_string(strategy));
    Session s(config, "eval_" + name);
    std::vector<fs::path> upstream{w.curated(), w.split()};
    StrategyResult result;
    std::int64_t per_problem = 0;
    if (strategy == Strategy::aupair || strategy == Strategy::random_pairs) {
      auto store = PairStore::load(w.pairs());
      std::vector<const CandidatePair*> ordered;
      if (strategy == Strategy::aupair) {
        ordered = resolve_aupairs(load_aupairs(w.aupairs()), store);
        upstream.push_back(w.aupairs());
      } else {
        const auto want = std::min<std::size_t>(static_cast<std::size_t>(n),
                                                eligible_random_pairs(store, config.random_dedup));
        ordered = random_pair_baseline(store, want, config.random_seed, config.random_dedup);
      }
      upstream.push_back(w.pairs());
      per_problem = planned_calls_per_problem(strategy, n, ordered.size(), config.self_repair);
      Budget budget(per_problem * static_cast<std::int64_t>(test.size()));
      result = run_pair_inference(test, ordered, index, n, s.gateway, budget, s.evaluator, opts,
                                  strategy);
    } else if (strategy == Strategy::best_of_n) {
      per_problem = n;
      Budget budget(per_problem * static_cast<std::int64_t>(test.size()));
      result = run_best_of_n(test, n, s.gateway, budget, s.evaluator, opts);
    } else {
      per_problem = planned_calls_per_problem(strategy, n, 0, config.self_repair);
      Budget budget(per_problem * static_cast<std::int64_t>(test.size()));
      result = run_self_repair(test, n, config.self_repair, s.gateway, budget, s.evaluator, opts);
    }
    result.budget_per_problem = n;
    auto prov = provenance(config, "eval", upstream);
    write_with_meta(w.results(strategy), strategy_result_to_jsonl(result), prov);
    auto metrics = compute_metrics(result, test, config.include_initial_guess);
    json body = metrics_to_json(metrics);
    body["strategy"] = name;
    body["n"] = n;
    body["calls_per_problem"] = per_problem;
    body["include_initial_guess"] = config.include_initial_guess;
    prov["upstream"][w.results(strategy).filename().string()] = file_digest(w.results(strategy));
    write_json(w.metrics(strategy), body, prov);
    spdlog::info("eval {}: test pass rate {:.4f}, strict accuracy {:.4f}", name,
                 metrics.test_pass_rate, metrics.strict_accuracy);
    summary[name] = {{"test_pass_rate", metrics.test_pass_rate},
                     {"strict_accuracy", metrics.strict_accuracy}};
  }

  // Scaling curve over every strategy with results on disk.
  std::ostringstream csv;
  csv << "strategy,n,test_pass_rate,strict_accuracy\n";
  std::vector<fs::path> upstream;
  for (auto strategy : {Strategy::aupair, Strategy::best_of_n, Strategy::self_repair,
                        Strategy::random_pairs}) {
    if (!fs::exists(w.results(strategy))) continue;
    upstream.push_back(w.results(strategy));
    auto result = load_strategy_result(w.results(strategy), strategy, n);
    std::size_t longest = 0;
    for (const auto& [_, attempts] : result.per_problem) longest = std::max(longest, attempts.size());
    for (std::size_t k = 1; k <= longest; ++k) {
      auto m = compute_metrics(result, test, config.include_initial_guess, k);
      csv << to_string(strategy) << ',' << k << ',' << m.test_pass_rate << ','
          << m.strict_accuracy << '\n';
    }
  }
  write_with_meta(w.scaling(), csv.str(), provenance(config, "eval", upstream));
  return summary;
}

json cmd_analyze(const RunConfig& config) {
  Workdir w{config.workdir};
  require(w.pairs(), "candidate pairs", "pairgen");
  auto test = load_split_part(config, 2);
  auto curated = load_curated(w.curated());
  ProblemIndex index(curated);
  auto store = PairStore::load(w.pairs());
  fs::create_directories(w.analysis());
  json summary = json::object();

  json lineage = json::object();
  for (const auto& [depth, count] : lineage_histogram(store)) lineage[std::to_string(depth)] = count;
  write_json(w.analysis() / "lineage.json", json{{"histogram", lineage}},
             provenance(config, "analyze", {w.pairs()}));
  summary["lineage"] = lineage;

  std::vector<const CandidatePair*> all;
  for (const auto& p : store.pairs()) all.push_back(&p);
  json categories = {{"all_pairs", pair_category_distribution(all, index)}};
  std::vector<fs::path> cat_upstream{w.pairs()};
  if (fs::exists(w.aupairs())) {
    categories["aupairs"] =
        pair_category_distribution(resolve_aupairs(load_aupairs(w.aupairs()), store), index);
    cat_upstream.push_back(w.aupairs());
  }
  write_json(w.analysis() / "pair_categories.json", categories,
             provenance(config, "analyze", cat_upstream));

  PythonAstParser parser(config.python, config.normalize_identifiers);
  for (auto strategy : {Strategy::aupair, Strategy::best_of_n, Strategy::self_repair,
                        Strategy::random_pairs}) {
    if (!fs::exists(w.results(strategy))) continue;
    const std::string name(to_string(strategy));
    auto result = load_strategy_result(w.results(strategy), strategy, config.inference_n);
    auto prov = provenance(config, "analyze", {w.results(strategy), w.curated(), w.split()});
    auto diversity = diversity_score(result, test, static_cast<std::size_t>(config.inference_n), parser);
    write_json(w.analysis() / ("diversity_" + name + ".json"), diversity_to_json(diversity), prov);
    write_with_meta(w.analysis() / ("breakdown_difficulty_" + name + ".csv"),
                    breakdown_csv(breakdown(result, test, BreakdownAxis::difficulty)), prov);
    write_with_meta(w.analysis() / ("breakdown_category_" + name + ".csv"),
                    breakdown_csv(breakdown(result, test, BreakdownAxis::category)), prov);
    summary["diversity"][name] = diversity.delta;
  }
  return summary;
}

json dry_run_plan(const RunConfig& config) {
  Workdir w{config.workdir};
  json plan = json::object();
  const auto problems = load_dataset(config.problems);
  plan["curate"] = config.curate_budget > 0 ? config.curate_budget
                                            : static_cast<std::int64_t>(problems.size());
  plan["pairgen"] = config.pairgen_budget;

  std::optional<std::size_t> n_val, n_test;
  if (fs::exists(w.curated()) && fs::exists(w.split())) {
    auto manifest = manifest_from_json(read_file(w.split()));
    n_val = manifest.ids[1].size();
    n_test = manifest.ids[2].size();
  }
  std::optional<std::size_t> n_pairs;
  if (fs::exists(w.pairs())) n_pairs = PairStore::load(w.pairs()).size();
  if (config.extract_budget > 0)
    plan["extract"] = config.extract_budget;
  else if (n_val && n_pairs)
    plan["extract"] = *n_val * *n_pairs;
  else
    plan["extract"] = nullptr;

  json eval = json::object();
  for (auto s : config.strategies) {
    std::size_t available = static_cast<std::size_t>(config.inference_n);
    if (s == Strategy::aupair && fs::exists(w.aupairs()))
      available = load_aupairs(w.aupairs()).size();
    if (s == Strategy::random_pairs && fs::exists(w.pairs()))
      available = eligible_random_pairs(PairStore::load(w.pairs()), config.random_dedup);
    const auto per = planned_calls_per_problem(s, config.inference_n, available, config.self_repair);
    eval[std::string(to_string(s))] =
        n_test ? json(per * static_cast<std::int64_t>(*n_test)) : json(nullptr);
  }
  plan["eval"] = eval;
  plan["note"] = "null entries depend on artifacts not yet produced";
  return plan;
}

}  // namespace aupair
