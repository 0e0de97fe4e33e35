#include "aupair/config.hpp"

#include <algorithm>
#include <cmath>

#include <toml.hpp>

#include "aupair/digest.hpp"
#include "aupair/error.hpp"

namespace aupair {

namespace fs = std::filesystem;

namespace {

void apply_override(toml::table& root, const std::string& assignment, std::vector<std::string>& errors) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back("override '" + assignment + "' is not key=value");
    return;
  }
  std::string key = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);
  while (!key.empty() && key.back() == ' ') key.pop_back();

  toml::table parsed;
  try {
    parsed = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    parsed.insert_or_assign("v", value);
  }

  toml::table* table = &root;
  std::size_t start = 0;
  for (;;) {
    auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      parsed.get("v")->visit([&](auto&& node) { table->insert_or_assign(part, node); });
      return;
    }
    auto* next = (*table)[part].as_table();
    if (!next) {
      table->insert_or_assign(part, toml::table{});
      next = (*table)[part].as_table();
    }
    table = next;
    start = dot + 1;
  }
}

class Reader {
 public:
  Reader(const toml::table& root, fs::path base) : root_(root), base_(std::move(base)) {}

  template <typename T>
  void get(const char* path, T& out) {
    auto node = root_.at_path(path);
    if (!node) return;
    if (auto v = node.value<T>())
      out = *v;
    else
      errors.push_back(std::string(path) + ": wrong type");
  }

  void get_path(const char* path, fs::path& out) {
    std::string s;
    get(path, s);
    if (!s.empty()) out = resolve(s);
  }

  void get_strings(const char* path, std::vector<std::string>& out) {
    auto node = root_.at_path(path);
    if (!node) return;
    auto* arr = node.as_array();
    if (!arr) {
      errors.push_back(std::string(path) + ": expected an array of strings");
      return;
    }
    out.clear();
    for (const auto& el : *arr) {
      if (auto s = el.value<std::string>())
        out.push_back(*s);
      else
        errors.push_back(std::string(path) + ": expected strings");
    }
  }

  fs::path resolve(const std::string& s) const {
    fs::path p(s);
    return p.is_absolute() ? p : (base_ / p).lexically_normal();
  }

  std::vector<std::string> errors;

 private:
  const toml::table& root_;
  fs::path base_;
};

}  // namespace

json RunConfig::to_json() const {
  json strategies_json = json::array();
  for (auto s : strategies) strategies_json.push_back(std::string(to_string(s)));
  return json{
      {"problems", problems.string()},
      {"workdir", workdir.string()},
      {"split", {{"ratios", split_ratios}, {"seed", split_seed}}},
      {"gateway",
       {{"backend", backend},
        {"parallelism", gateway_parallelism},
        {"temperature", gen.temperature},
        {"max_tokens", gen.max_tokens},
        {"stop", gen.stop_sequences},
        {"ruleset", ruleset.string()},
        {"replay_dir", replay_dir.string()},
        {"replay_fallback", replay_fallback},
        {"record_dir", record_dir.string()},
        {"http",
         {{"url", http.url},
          {"token_env", http.token_env},
          {"prompt_path", http.prompt_path},
          {"completion_path", http.completion_path},
          {"temperature_path", http.temperature_path},
          {"max_tokens_path", http.max_tokens_path},
          {"stop_path", http.stop_path},
          {"extra_body", http.extra_body},
          {"timeout_ms", http.timeout.count()},
          {"attempts", http.attempts},
          {"backoff_ms", http.backoff.count()}}}}},
      {"budgets",
       {{"curate", curate_budget},
        {"pairgen", pairgen_budget},
        {"extract", extract_budget},
        {"inference", inference_n}}},
      {"pairgen", {{"k", k}, {"seed", pairgen_seed}}},
      {"extract", {{"tolerance", tolerance}}},
      {"eval",
       {{"strategies", strategies_json},
        {"feedbacks", self_repair.feedbacks},
        {"repairs_per_feedback", self_repair.repairs_per_feedback},
        {"random_seed", random_seed},
        {"random_dedup", random_dedup},
        {"include_initial_guess", include_initial_guess},
        {"parallelism", eval_parallelism}}},
      {"runner",
       {{"command", runner.command},
        {"timeout_ms", evaluator.limits.wall_timeout.count()},
        {"max_output_bytes", evaluator.limits.max_output_bytes},
        {"parallelism", evaluator.parallelism},
        {"memoize", evaluator.memoize},
        {"numeric_tolerance",
         evaluator.numeric_tolerance ? json(*evaluator.numeric_tolerance) : json(nullptr)}}},
      {"prompt", {{"style", std::string(to_string(gen.style))}}},
      {"analysis", {{"python", python}, {"normalize_identifiers", normalize_identifiers}}}};
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()); }

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw ValidationError(path.string() + ": " + std::string(e.description()));
  }
  std::vector<std::string> errors;
  for (const auto& o : overrides) apply_override(root, o, errors);

  const fs::path base = fs::absolute(path).parent_path();
  Reader in(root, base);
  RunConfig c;

  in.get_path("data.problems", c.problems);
  std::string workdir = "run";
  in.get("data.workdir", workdir);
  c.workdir = in.resolve(workdir);

  if (auto node = root.at_path("split.ratios")) {
    auto* arr = node.as_array();
    if (!arr || arr->size() != 3) {
      in.errors.push_back("split.ratios: expected three numbers");
    } else {
      for (std::size_t i = 0; i < 3; ++i) {
        if (auto v = (*arr)[i].value<double>())
          c.split_ratios[i] = *v;
        else
          in.errors.push_back("split.ratios: expected numbers");
      }
    }
  }
  std::int64_t seed = 0;
  in.get("split.seed", seed);
  c.split_seed = static_cast<std::uint64_t>(seed);

  in.get("gateway.backend", c.backend);
  std::int64_t par = 1;
  in.get("gateway.parallelism", par);
  c.gateway_parallelism = static_cast<std::size_t>(std::max<std::int64_t>(1, par));
  in.get("gateway.temperature", c.gen.temperature);
  std::int64_t max_tokens = c.gen.max_tokens;
  in.get("gateway.max_tokens", max_tokens);
  c.gen.max_tokens = static_cast<int>(max_tokens);
  in.get_strings("gateway.stop", c.gen.stop_sequences);
  in.get_path("gateway.ruleset", c.ruleset);
  in.get_path("gateway.replay_dir", c.replay_dir);
  in.get("gateway.replay_fallback", c.replay_fallback);
  in.get_path("gateway.record_dir", c.record_dir);
  in.get("gateway.http.url", c.http.url);
  in.get("gateway.http.token_env", c.http.token_env);
  in.get("gateway.http.prompt_path", c.http.prompt_path);
  in.get("gateway.http.completion_path", c.http.completion_path);
  in.get("gateway.http.temperature_path", c.http.temperature_path);
  in.get("gateway.http.max_tokens_path", c.http.max_tokens_path);
  in.get("gateway.http.stop_path", c.http.stop_path);
  if (auto node = root.at_path("gateway.http.extra_body")) {
    std::string body;
    in.get("gateway.http.extra_body", body);
    try {
      if (!body.empty()) c.http.extra_body = json::parse(body);
    } catch (const json::exception&) {
      in.errors.push_back("gateway.http.extra_body: not valid JSON");
    }
  }
  double http_timeout = 120.0;
  in.get("gateway.http.timeout_s", http_timeout);
  c.http.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(http_timeout * 1000));
  std::int64_t attempts = c.http.attempts, backoff = c.http.backoff.count();
  in.get("gateway.http.attempts", attempts);
  in.get("gateway.http.backoff_ms", backoff);
  c.http.attempts = static_cast<int>(attempts);
  c.http.backoff = std::chrono::milliseconds(backoff);

  in.get("budgets.curate", c.curate_budget);
  in.get("budgets.pairgen", c.pairgen_budget);
  in.get("budgets.extract", c.extract_budget);
  std::int64_t n = c.inference_n;
  in.get("budgets.inference", n);
  c.inference_n = static_cast<int>(n);

  std::int64_t k = static_cast<std::int64_t>(c.k);
  in.get("pairgen.k", k);
  c.k = static_cast<std::size_t>(std::max<std::int64_t>(0, k));
  std::int64_t pseed = 0;
  in.get("pairgen.seed", pseed);
  c.pairgen_seed = static_cast<std::uint64_t>(pseed);

  in.get("extract.tolerance", c.tolerance);

  std::vector<std::string> strategies;
  in.get_strings("eval.strategies", strategies);
  if (!strategies.empty()) {
    c.strategies.clear();
    for (const auto& s : strategies) {
      try {
        c.strategies.push_back(strategy_from_string(s));
      } catch (const ValidationError& e) {
        in.errors.push_back(std::string("eval.strategies: ") + e.what());
      }
    }
  }
  std::int64_t f = c.self_repair.feedbacks, r = c.self_repair.repairs_per_feedback;
  in.get("eval.feedbacks", f);
  in.get("eval.repairs_per_feedback", r);
  c.self_repair = {static_cast<int>(f), static_cast<int>(r)};
  std::int64_t rseed = 0;
  in.get("eval.random_seed", rseed);
  c.random_seed = static_cast<std::uint64_t>(rseed);
  in.get("eval.random_dedup", c.random_dedup);
  in.get("eval.include_initial_guess", c.include_initial_guess);
  std::int64_t epar = 1;
  in.get("eval.parallelism", epar);
  c.eval_parallelism = static_cast<std::size_t>(std::max<std::int64_t>(1, epar));

  in.get_strings("runner.command", c.runner.command);
  for (auto& token : c.runner.command)
    if (token.find('/') != std::string::npos && !fs::path(token).is_absolute())
      token = in.resolve(token).string();
  double timeout_s = 10.0;
  in.get("runner.timeout_s", timeout_s);
  c.evaluator.limits.wall_timeout =
      std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000));
  std::int64_t max_out = static_cast<std::int64_t>(c.evaluator.limits.max_output_bytes);
  in.get("runner.max_output_bytes", max_out);
  c.evaluator.limits.max_output_bytes = static_cast<std::size_t>(std::max<std::int64_t>(0, max_out));
  std::int64_t rpar = 1;
  in.get("runner.parallelism", rpar);
  c.evaluator.parallelism = static_cast<std::size_t>(std::max<std::int64_t>(1, rpar));
  c.evaluator.memoize = true;
  in.get("runner.memoize", c.evaluator.memoize);
  if (root.at_path("runner.numeric_tolerance")) {
    double tol = 0;
    in.get("runner.numeric_tolerance", tol);
    c.evaluator.numeric_tolerance = tol;
  }

  std::string style(to_string(c.gen.style));
  in.get("prompt.style", style);
  try {
    c.gen.style = prompt_style_from_string(style);
  } catch (const ValidationError& e) {
    in.errors.push_back(std::string("prompt.style: ") + e.what());
  }
  in.get("analysis.python", c.python);
  in.get("analysis.normalize_identifiers", c.normalize_identifiers);

  // Semantic checks.
  auto& e = in.errors;
  e.insert(e.begin(), errors.begin(), errors.end());
  if (c.problems.empty())
    e.push_back("data.problems is required");
  else if (!fs::exists(c.problems))
    e.push_back("data.problems: '" + c.problems.string() + "' does not exist");
  const double sum = c.split_ratios[0] + c.split_ratios[1] + c.split_ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) e.push_back("split.ratios must sum to 1");
  if (c.backend == "scripted") {
    if (c.ruleset.empty() || !fs::exists(c.ruleset))
      e.push_back("gateway.ruleset must name an existing file for the scripted backend");
  } else if (c.backend == "replay") {
    if (c.replay_dir.empty()) e.push_back("gateway.replay_dir is required for the replay backend");
    if (!c.replay_fallback.empty() && c.replay_fallback != "http" && c.replay_fallback != "scripted")
      e.push_back("gateway.replay_fallback must be empty, 'http' or 'scripted'");
  } else if (c.backend != "http") {
    e.push_back("gateway.backend must be scripted, replay or http");
  }
  if ((c.backend == "http" || c.replay_fallback == "http") && c.http.url.empty())
    e.push_back("gateway.http.url is required for http calls");
  if (c.replay_fallback == "scripted" && (c.ruleset.empty() || !fs::exists(c.ruleset)))
    e.push_back("gateway.ruleset must name an existing file for the scripted fallback");
  if (c.gen.temperature < 0) e.push_back("gateway.temperature must be non-negative");
  if (c.gen.max_tokens <= 0) e.push_back("gateway.max_tokens must be positive");
  if (c.curate_budget < 0) e.push_back("budgets.curate must be non-negative");
  if (c.pairgen_budget <= 0) e.push_back("budgets.pairgen must be positive");
  if (c.extract_budget < 0) e.push_back("budgets.extract must be non-negative");
  if (c.inference_n <= 0) e.push_back("budgets.inference must be positive");
  if (!(c.tolerance > 0)) e.push_back("extract.tolerance must be positive");
  if (c.self_repair.feedbacks < 1 || c.self_repair.repairs_per_feedback < 1)
    e.push_back("eval.feedbacks and eval.repairs_per_feedback must be at least 1");
  if (c.runner.command.empty()) e.push_back("runner.command is required");
  for (const auto& token : c.runner.command)
    if (fs::path(token).is_absolute() && !fs::exists(token))
      e.push_back("runner.command: '" + token + "' does not exist");
  if (c.evaluator.limits.wall_timeout.count() <= 0) e.push_back("runner.timeout_s must be positive");
  if (!e.empty()) throw ValidationError(e);
  return c;
}

}  // namespace aupair
