#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aupair/gateway.hpp"

namespace aupair {

// ---------------------------------------------------------------------------
// Scripted oracle

// A rule matches when every field it sets matches the request. List-valued
// fields match when any listed value matches; `pair` and `pair_problem` match
// when any in-context pair does. The first matching rule wins.
//
// Responses are templates: {{guess}} expands to the code being repaired,
// {{last_code_block}} to the last fenced block of the prompt and
// {{problem_id}} to the target problem.
struct OracleRule {
  std::optional<std::vector<std::string>> purpose;
  std::optional<std::vector<std::string>> problem;
  std::optional<std::vector<std::string>> pair;
  std::optional<std::vector<std::string>> pair_problem;
  std::optional<std::vector<std::int64_t>> call_index;
  std::optional<std::vector<std::int64_t>> attempt_index;
  std::string response;
};

struct OracleRuleset {
  std::vector<OracleRule> rules;
  std::string default_response;
};

// Parses a ruleset document. When `known_problems` is given, rules naming
// problems outside it are rejected.
OracleRuleset parse_ruleset(const json& doc,
                            const std::set<std::string>* known_problems = nullptr);
OracleRuleset load_ruleset(const std::filesystem::path& path,
                           const std::set<std::string>* known_problems = nullptr);

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(OracleRuleset rules) : rules_(std::move(rules)) {}
  BackendReply complete(const GenerationRequest& request, const std::string& key,
                        std::int64_t call_index) override;

 private:
  OracleRuleset rules_;
};

std::shared_ptr<Backend> scripted_oracle(OracleRuleset rules);

// ---------------------------------------------------------------------------
// Replay store

// Content-addressed response store: one JSONL file per cache key, holding the
// responses in the order the key was requested. The n-th request for a key in
// a run replays the n-th stored response.
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir);

  std::optional<std::string> lookup(const std::string& key, std::size_t occurrence);
  void put(const std::string& key, std::size_t occurrence, const std::string& response);
  std::size_t count(const std::string& key);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::vector<std::string>& entries(const std::string& key);
  void flush(const std::string& key);

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> cache_;
};

// Serves responses from a store and never touches the network. Strict mode
// (no fallback) raises CacheMiss; otherwise misses go to `fallback` and are
// written back to the store.
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::shared_ptr<ReplayStore> store, std::shared_ptr<Backend> fallback = nullptr);
  BackendReply complete(const GenerationRequest& request, const std::string& key,
                        std::int64_t call_index) override;

 private:
  std::shared_ptr<ReplayStore> store_;
  std::shared_ptr<Backend> fallback_;
  std::mutex mutex_;
  std::map<std::string, std::size_t> seen_;
};

// Passes calls through to `inner` and records every response into the store.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ReplayStore> store);
  BackendReply complete(const GenerationRequest& request, const std::string& key,
                        std::int64_t call_index) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<ReplayStore> store_;
  std::mutex mutex_;
  std::map<std::string, std::size_t> seen_;
};

// ---------------------------------------------------------------------------
// HTTP

// A single JSON endpoint. Field locations are JSON pointers; an empty pointer
// leaves that field out of the request body.
struct HttpConfig {
  std::string url;
  std::string token_env;  // name of the env var holding the bearer token
  std::string prompt_path = "/prompt";
  std::string completion_path = "/completion";
  std::string temperature_path = "/temperature";
  std::string max_tokens_path = "/max_tokens";
  std::string stop_path = "/stop";
  json extra_body = json::object();
  std::chrono::milliseconds timeout{120'000};
  int attempts = 3;
  std::chrono::milliseconds backoff{500};
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpConfig config);
  BackendReply complete(const GenerationRequest& request, const std::string& key,
                        std::int64_t call_index) override;

  json request_body(const GenerationRequest& request) const;

 private:
  HttpConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace aupair
