#include "aupair/backends.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "aupair/error.hpp"
#include "aupair/json_io.hpp"
#include "aupair/prompt.hpp"

namespace aupair {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Scripted oracle

namespace {

template <typename T>
std::optional<std::vector<T>> one_or_many(const json& rule, const char* field) {
  auto it = rule.find(field);
  if (it == rule.end() || it->is_null()) return std::nullopt;
  if (it->is_array()) return it->get<std::vector<T>>();
  return std::vector<T>{it->get<T>()};
}

template <typename T>
bool matches(const std::optional<std::vector<T>>& want, const T& have) {
  return !want || std::find(want->begin(), want->end(), have) != want->end();
}

bool matches_any(const std::optional<std::vector<std::string>>& want,
                 const std::vector<std::string>& have) {
  if (!want) return true;
  return std::any_of(have.begin(), have.end(), [&](const std::string& h) {
    return std::find(want->begin(), want->end(), h) != want->end();
  });
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

}  // namespace

OracleRuleset parse_ruleset(const json& doc, const std::set<std::string>* known_problems) {
  OracleRuleset out;
  std::vector<std::string> errors;
  try {
    out.default_response = doc.value("default", std::string{});
    const auto rules = doc.value("rules", json::array());
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const auto& r = rules[i];
      OracleRule rule;
      rule.purpose = one_or_many<std::string>(r, "purpose");
      rule.problem = one_or_many<std::string>(r, "problem");
      rule.pair = one_or_many<std::string>(r, "pair");
      rule.pair_problem = one_or_many<std::string>(r, "pair_problem");
      rule.call_index = one_or_many<std::int64_t>(r, "call_index");
      rule.attempt_index = one_or_many<std::int64_t>(r, "attempt_index");
      if (!r.contains("response")) errors.push_back("rule " + std::to_string(i) + " has no response");
      rule.response = r.value("response", std::string{});
      if (known_problems) {
        for (const auto* field : {&rule.problem, &rule.pair_problem})
          if (*field)
            for (const auto& id : **field)
              if (!known_problems->count(id))
                errors.push_back("rule " + std::to_string(i) + " references unknown problem '" +
                                 id + "'");
      }
      out.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    errors.push_back(std::string("malformed ruleset: ") + e.what());
  }
  if (!errors.empty()) throw ValidationError(errors);
  return out;
}

OracleRuleset load_ruleset(const fs::path& path, const std::set<std::string>* known_problems) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_ruleset(doc, known_problems);
}

BackendReply ScriptedBackend::complete(const GenerationRequest& request, const std::string&,
                                       std::int64_t call_index) {
  const auto& ctx = request.context;
  const std::string* response = &rules_.default_response;
  for (const auto& rule : rules_.rules) {
    if (matches(rule.purpose, request.tag) && matches(rule.problem, ctx.problem_id) &&
        matches_any(rule.pair, ctx.pair_ids) && matches_any(rule.pair_problem, ctx.pair_problem_ids) &&
        matches(rule.call_index, call_index) && matches(rule.attempt_index, ctx.attempt_index)) {
      response = &rule.response;
      break;
    }
  }
  std::string text = *response;
  if (text.find("{{") != std::string::npos) {
    replace_all(text, "{{guess}}", ctx.guess_code);
    replace_all(text, "{{problem_id}}", ctx.problem_id);
    replace_all(text, "{{last_code_block}}", last_fenced_block(request.prompt).value_or(""));
  }
  return {std::move(text), BackendKind::scripted, false};
}

std::shared_ptr<Backend> scripted_oracle(OracleRuleset rules) {
  return std::make_shared<ScriptedBackend>(std::move(rules));
}

// ---------------------------------------------------------------------------
// Replay store

ReplayStore::ReplayStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::vector<std::string>& ReplayStore::entries(const std::string& key) {
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto& list = cache_[key];
  const auto file = dir_ / (key + ".jsonl");
  if (fs::exists(file))
    for_each_jsonl(file, [&](std::size_t, const json& j) {
      list.push_back(j.at("response").get<std::string>());
    });
  return list;
}

void ReplayStore::flush(const std::string& key) {
  std::vector<json> lines;
  for (const auto& r : cache_.at(key)) lines.push_back(json{{"response", r}});
  write_file_atomic(dir_ / (key + ".jsonl"), to_jsonl(lines));
}

std::optional<std::string> ReplayStore::lookup(const std::string& key, std::size_t occurrence) {
  std::lock_guard lock(mutex_);
  const auto& list = entries(key);
  if (occurrence < list.size()) return list[occurrence];
  return std::nullopt;
}

void ReplayStore::put(const std::string& key, std::size_t occurrence, const std::string& response) {
  std::lock_guard lock(mutex_);
  auto& list = entries(key);
  if (occurrence > list.size())
    throw Error("replay store gap for key " + key + " at occurrence " + std::to_string(occurrence));
  if (occurrence == list.size())
    list.push_back(response);
  else
    list[occurrence] = response;
  flush(key);
}

std::size_t ReplayStore::count(const std::string& key) {
  std::lock_guard lock(mutex_);
  return entries(key).size();
}

ReplayBackend::ReplayBackend(std::shared_ptr<ReplayStore> store, std::shared_ptr<Backend> fallback)
    : store_(std::move(store)), fallback_(std::move(fallback)) {
  if (!store_) throw ValidationError("replay backend needs a store");
}

BackendReply ReplayBackend::complete(const GenerationRequest& request, const std::string& key,
                                     std::int64_t call_index) {
  std::size_t occurrence = 0;
  {
    std::lock_guard lock(mutex_);
    occurrence = seen_[key]++;
  }
  if (auto hit = store_->lookup(key, occurrence)) return {*hit, BackendKind::replay, false};
  if (!fallback_)
    throw CacheMiss("replay miss for key " + key + " (occurrence " + std::to_string(occurrence) +
                    ", tag '" + request.tag + "')");
  auto reply = fallback_->complete(request, key, call_index);
  if (!reply.transport_failed) store_->put(key, occurrence, reply.text);
  return reply;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ReplayStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

BackendReply RecordingBackend::complete(const GenerationRequest& request, const std::string& key,
                                        std::int64_t call_index) {
  auto reply = inner_->complete(request, key, call_index);
  std::size_t occurrence = 0;
  {
    std::lock_guard lock(mutex_);
    occurrence = seen_[key]++;
  }
  store_->put(key, occurrence, reply.text);
  return reply;
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("http url needs a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
  if (config_.completion_path.empty()) throw ValidationError("http completion path is empty");
  if (config_.prompt_path.empty()) throw ValidationError("http prompt path is empty");
  config_.attempts = std::max(1, config_.attempts);
}

json HttpBackend::request_body(const GenerationRequest& request) const {
  json body = config_.extra_body.is_object() ? config_.extra_body : json::object();
  auto set = [&](const std::string& pointer, json value) {
    if (!pointer.empty()) body[json::json_pointer(pointer)] = std::move(value);
  };
  set(config_.prompt_path, request.prompt);
  set(config_.temperature_path, request.temperature);
  set(config_.max_tokens_path, request.max_tokens);
  if (!request.stop_sequences.empty()) set(config_.stop_path, request.stop_sequences);
  return body;
}

BackendReply HttpBackend::complete(const GenerationRequest& request, const std::string&,
                                   std::int64_t call_index) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.token_env.empty()) {
    if (const char* token = std::getenv(config_.token_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string body = request_body(request).dump();

  auto delay = config_.backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.attempts; ++attempt) {
    auto res = client.Post(path_, headers, body, "application/json");
    if (res && res->status == 200) {
      try {
        const auto doc = json::parse(res->body);
        return {doc.at(json::json_pointer(config_.completion_path)).get<std::string>(),
                BackendKind::http, false};
      } catch (const json::exception& e) {
        last_error = std::string("bad response body: ") + e.what();
      }
    } else if (res) {
      last_error = "HTTP status " + std::to_string(res->status);
    } else {
      last_error = httplib::to_string(res.error());
    }
    spdlog::warn("call {}: attempt {}/{} failed: {}", call_index, attempt, config_.attempts,
                 last_error);
    if (attempt < config_.attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  spdlog::error("call {}: giving up after {} attempts; recording an empty response", call_index,
                config_.attempts);
  return {"", BackendKind::http, true};
}

}  // namespace aupair
