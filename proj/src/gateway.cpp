#include "aupair/gateway.hpp"

#include "aupair/digest.hpp"
#include "aupair/error.hpp"

namespace aupair {

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::http: return "http";
    case BackendKind::replay: return "replay";
    case BackendKind::scripted: return "scripted";
  }
  return "unknown";
}

namespace {

BackendKind backend_from_string(const std::string& s) {
  if (s == "http") return BackendKind::http;
  if (s == "replay") return BackendKind::replay;
  if (s == "scripted") return BackendKind::scripted;
  throw ValidationError("unknown backend kind '" + s + "'");
}

}  // namespace

std::string cache_key(const GenerationRequest& r) {
  const json j{{"prompt", r.prompt},
               {"temperature", r.temperature},
               {"max_tokens", r.max_tokens},
               {"stop_sequences", r.stop_sequences}};
  return sha256_hex(j.dump());
}

json record_to_json(const GenerationRecord& r) {
  const auto& q = r.request;
  return json{{"call_index", r.call_index},
              {"cache_key", r.cache_key},
              {"backend", std::string(to_string(r.backend))},
              {"request",
               {{"prompt", q.prompt},
                {"temperature", q.temperature},
                {"max_tokens", q.max_tokens},
                {"stop_sequences", q.stop_sequences},
                {"tag", q.tag}}},
              {"context",
               {{"problem_id", q.context.problem_id},
                {"pair_ids", q.context.pair_ids},
                {"pair_problem_ids", q.context.pair_problem_ids},
                {"attempt_index", q.context.attempt_index}}},
              {"response_text", r.response_text},
              {"transport_failed", r.transport_failed}};
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  j.at("call_index").get_to(r.call_index);
  j.at("cache_key").get_to(r.cache_key);
  r.backend = backend_from_string(j.at("backend").get<std::string>());
  const auto& q = j.at("request");
  q.at("prompt").get_to(r.request.prompt);
  q.at("temperature").get_to(r.request.temperature);
  q.at("max_tokens").get_to(r.request.max_tokens);
  q.at("stop_sequences").get_to(r.request.stop_sequences);
  q.at("tag").get_to(r.request.tag);
  if (auto it = j.find("context"); it != j.end()) {
    r.request.context.problem_id = it->value("problem_id", std::string{});
    r.request.context.pair_ids = it->value("pair_ids", std::vector<std::string>{});
    r.request.context.pair_problem_ids = it->value("pair_problem_ids", std::vector<std::string>{});
    r.request.context.attempt_index = it->value("attempt_index", std::int64_t{-1});
  }
  j.at("response_text").get_to(r.response_text);
  r.transport_failed = j.value("transport_failed", false);
  return r;
}

Budget::Budget(std::int64_t limit) : limit_(limit) {
  if (limit < 0) throw ValidationError("budget limit must be non-negative");
}

std::int64_t Budget::used() const {
  std::lock_guard lock(mutex_);
  return used_;
}

std::int64_t Budget::remaining() const {
  std::lock_guard lock(mutex_);
  return limit_ - used_;
}

void Budget::consume() {
  std::lock_guard lock(mutex_);
  if (used_ >= limit_)
    throw BudgetExhausted("budget exhausted (" + std::to_string(used_) + "/" +
                          std::to_string(limit_) + " calls used)");
  ++used_;
}

RunLog::RunLog(const std::filesystem::path& path, bool truncate) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.emplace(path, truncate ? std::ios::trunc : std::ios::app);
  if (!*out_) throw EnvironmentError("cannot open run log '" + path.string() + "'");
}

void RunLog::append(const GenerationRecord& record) {
  std::lock_guard lock(mutex_);
  if (out_) {
    *out_ << record_to_json(record).dump() << '\n';
    out_->flush();
  }
  records_.push_back(record);
}

std::size_t RunLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<GenerationRecord> RunLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<GenerationRecord> RunLog::read(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open run log '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_json(json::parse(line)));
  return out;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<RunLog> log,
                 std::size_t parallelism)
    : backend_(std::move(backend)),
      log_(log ? std::move(log) : std::make_shared<RunLog>()),
      parallelism_(std::max<std::size_t>(1, parallelism)),
      slots_(static_cast<std::ptrdiff_t>(parallelism_)) {
  if (!backend_) throw ValidationError("gateway needs a backend");
}

std::int64_t Gateway::calls() const {
  std::lock_guard lock(mutex_);
  return next_call_;
}

GenerationRecord Gateway::generate(const GenerationRequest& request, Budget& budget) {
  if (request.prompt.empty()) throw ValidationError("generation request with empty prompt");
  if (!(request.temperature >= 0.0)) throw ValidationError("temperature must be non-negative");
  if (request.max_tokens <= 0) throw ValidationError("max_tokens must be positive");

  GenerationRecord record;
  record.request = request;
  record.cache_key = cache_key(request);
  {
    std::lock_guard lock(mutex_);
    const auto digest = sha256_hex(request.prompt);
    auto [it, fresh] = prompt_digests_.emplace(record.cache_key, digest);
    if (!fresh && it->second != digest)
      throw Error("cache key collision between distinct prompts: " + record.cache_key);
    budget.consume();
    record.call_index = next_call_++;
  }

  slots_.acquire();
  BackendReply reply;
  try {
    reply = backend_->complete(request, record.cache_key, record.call_index);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();

  record.response_text = std::move(reply.text);
  record.backend = reply.kind;
  record.transport_failed = reply.transport_failed;
  log_->append(record);
  return record;
}

}  // namespace aupair
